"""pairrec: a random-walk recommender that learns user preference vectors
from like/dislike feedback on recommendation-explanation item pairs."""

__version__ = "0.1.0"
