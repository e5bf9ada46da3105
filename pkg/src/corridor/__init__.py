"""Desk-scale remote volume visualization pipeline.

A striped network block cache feeds a parallel back end that ray-casts
axis-aligned volume slabs into semi-transparent textures; a compositing
viewer assembles the textures into images and steers the slab axis
upstream.  Every stage emits precision event records, and the
serial-vs-overlapped pipeline timing model is measured against its
prediction.
"""

__version__ = "0.1.0"
