from metrics_api.bleu import bleu, corpus_bleu
from metrics_api.rouge import lcs_length, rouge_l

__all__ = ["bleu", "corpus_bleu", "lcs_length", "rouge_l"]
