__version__ = "0.1.1"
VERSION = __version__
