"""Hard, soft and posterior assignment clustering over 1-D Gaussians."""
__version__ = "0.1.0"
