"""Blueprint registry for the application."""
