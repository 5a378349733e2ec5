"""Room reflections and binaural unmasking toolkit."""
__version__ = "0.1.0"
