import os
import torch
from model import ExLlamaCache
from tokenizer import ExLlamaTokenizer
from generator import ExLlamaGenerator

tokenizer = ExLlamaTokenizer("tokenizer.model")
cache = ExLlamaCache(None)
generator = ExLlamaGenerator(None, tokenizer, cache)
generator.settings.top_k = 40
ids = tokenizer.encode("hello")
generator.gen_begin(ids)
token = generator.get_accept_token(ids)
