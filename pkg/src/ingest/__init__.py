"""Case, scenario and sweep-result file formats."""
