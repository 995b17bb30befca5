# Semi-supervised contrastive learning with MMD distribution matching
__version__ = "1.0.0"
