"""Geographic stamping of news articles for hyper-local feeds."""

__version__ = "0.1.0"
