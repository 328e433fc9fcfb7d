"""Multi-user OTFS uplink channel estimation and detection."""
__version__ = "0.1.0"
