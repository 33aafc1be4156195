"""vidsift: find, label, and classify instructional videos for job-title/skill pairs."""

__version__ = "0.1.0"
