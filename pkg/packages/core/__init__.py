"""Settings, models and errors shared by every package."""
