"""Models package - immutable configuration and result records."""
