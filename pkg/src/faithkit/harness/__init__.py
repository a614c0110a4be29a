"""Configuration, experiment pipelines, reports and the command-line entry point."""
