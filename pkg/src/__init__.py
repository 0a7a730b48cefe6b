"""camb-depth - monocular depth estimation with CAMB attention."""
