"""ratecraft: reward learning from segment ratings, with a pairwise-preference
baseline, desk-scale control environments, and a human labeling service."""

__version__ = "0.1.0"
