"""Dynamically generated informationally complete POVMs and state reconstruction under random unitary dynamics."""
