"""
APC Speech Representations

Autoregressive and contrastive predictive coding for speech representation
learning, with linear-probe phone classification and LDA/cosine speaker
verification on top of the learned features.
"""

__version__ = "0.1.0"
__author__ = "Will Wade"
__email__ = "wwade@acecentre.org.uk"
