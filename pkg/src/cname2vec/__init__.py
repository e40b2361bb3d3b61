"""Company-name entity matching: synonym mining from job ads, a character
n-gram Bi-LSTM name encoder, cosine ranking and Success@k evaluation."""

__version__ = "0.1.0"
