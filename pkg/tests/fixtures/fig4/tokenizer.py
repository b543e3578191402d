class ExLlamaTokenizer:

    def __init__(self, path):
        self.path = path

    def encode(self, text):
        return [ord(c) for c in text]

    def decode(self, ids):
        return "".join(chr(i) for i in ids)
