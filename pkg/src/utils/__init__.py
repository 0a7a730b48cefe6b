"""Utils package - logging and file formats."""
