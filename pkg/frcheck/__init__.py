"""
frcheck: exact conditions, Schur witnesses and Monte Carlo checks for
two-parameter Forelli-Rudin type operators on tube domains over the
forward light cone
"""

__version__ = "0.1.0"
