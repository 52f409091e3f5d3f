"""Contrastive self-supervised pretraining of a brain-network graph
transformer on functional connectivity matrices, with a supervised
finetuning and evaluation harness."""

__version__ = "0.1.0"
