"""Ridge-regression heritability estimation and prediction-accuracy theory."""

__version__ = "0.1.0"
