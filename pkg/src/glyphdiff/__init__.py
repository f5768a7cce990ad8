"""glyphdiff: conditional denoising-diffusion toolkit for styled glyph images."""

__version__ = "0.1.0"
