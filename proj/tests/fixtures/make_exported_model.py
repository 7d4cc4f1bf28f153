#!/usr/bin/env python3
"""Regenerate the exported-model fixtures used by the adapter tests.

Produces two export directories under tests/fixtures/exported/:
  td/          1-logit head (binary TD classifier)
  multiclass/  13-logit head in Category order

Each directory follows the export contract: model.onnx, tokenizer.json,
parity.jsonl (64 texts + reference scores from onnxruntime) and card.json.
Reference scores are produced by onnxruntime on token ids from the HF
`tokenizers` library, so they are independent of the C++ adapter.

Requires: torch, onnx, onnxruntime, tokenizers.
"""
import json
import pathlib
import random

import numpy as np
import onnxruntime as ort
import torch
from tokenizers import ByteLevelBPETokenizer
from tokenizers.processors import RobertaProcessing

CATEGORIES = [
    "Architecture", "Automation", "Build", "Code", "Defect", "Design",
    "Documentation", "Infrastructure", "People", "Process", "Requirement",
    "Service", "Test",
]
MAX_LEN = 512
OUT = pathlib.Path(__file__).resolve().parent / "exported"

WORDS = {
    "Architecture": "layering module boundary coupling monolith microservice",
    "Automation": "pipeline script cron workflow bot scheduler",
    "Build": "cmake gradle compile linker makefile artifact",
    "Code": "refactor duplicate smell naming function cleanup",
    "Defect": "crash segfault regression wrong broken exception",
    "Design": "pattern interface abstraction class hierarchy api",
    "Documentation": "readme docs tutorial comment guide manual",
    "Infrastructure": "server cluster kubernetes terraform network disk",
    "People": "onboarding knowledge ownership team handover training",
    "Process": "review release sprint triage policy checklist",
    "Requirement": "spec requirement acceptance story stakeholder scope",
    "Service": "endpoint latency rest grpc timeout availability",
    "Test": "unittest flaky coverage mock fixture assertion",
}
FILLER = ("the a we should this that it is when then after before on in for "
          "with our to of and please see also maybe needs update fix issue").split()


def make_text(rng, cat=None, td=None):
    words = [rng.choice(FILLER) for _ in range(rng.randint(6, 14))]
    if cat is not None:
        words += rng.sample(WORDS[cat].split(), 3)
    if td:
        words += rng.sample(["hack", "workaround", "todo", "legacy", "debt"], 2)
    rng.shuffle(words)
    return " ".join(words)


def train_tokenizer(texts, path):
    tok = ByteLevelBPETokenizer()
    tok.train_from_iterator(texts, vocab_size=400, min_frequency=2,
                            special_tokens=["<s>", "<pad>", "</s>", "<unk>"])
    tok.post_processor = RobertaProcessing(("</s>", tok.token_to_id("</s>")),
                                           ("<s>", tok.token_to_id("<s>")))
    tok.enable_truncation(MAX_LEN)
    tok.save(str(path))
    return tok


class PooledHead(torch.nn.Module):
    def __init__(self, vocab, n_out, dim=24):
        super().__init__()
        self.emb = torch.nn.Embedding(vocab, dim)
        self.proj = torch.nn.Linear(dim, dim)
        self.norm = torch.nn.LayerNorm(dim)
        self.out = torch.nn.Linear(dim, n_out)

    def forward(self, input_ids, attention_mask):
        h = self.emb(input_ids)
        m = attention_mask.unsqueeze(-1).to(h.dtype)
        pooled = (h * m).sum(dim=1) / m.sum(dim=1).clamp(min=1.0)
        z = torch.nn.functional.gelu(self.proj(pooled))
        return self.out(self.norm(z))


def fit(model, tok, texts, targets, multiclass):
    enc = [tok.encode(t).ids for t in texts]
    width = max(len(e) for e in enc)
    ids = torch.zeros(len(enc), width, dtype=torch.long)
    mask = torch.zeros(len(enc), width, dtype=torch.long)
    for i, e in enumerate(enc):
        ids[i, :len(e)] = torch.tensor(e)
        mask[i, :len(e)] = 1
    opt = torch.optim.Adam(model.parameters(), lr=0.03)
    y = torch.tensor(targets)
    for _ in range(25):
        opt.zero_grad()
        logits = model(ids, mask)
        if multiclass:
            loss = torch.nn.functional.cross_entropy(logits, y)
        else:
            loss = torch.nn.functional.binary_cross_entropy_with_logits(
                logits[:, 0], y.float())
        loss.backward()
        opt.step()


def export(model, out_dir, tok, parity_texts, card):
    out_dir.mkdir(parents=True, exist_ok=True)
    model.eval()
    ids = torch.tensor([[0, 5, 6, 2]], dtype=torch.long)
    mask = torch.ones_like(ids)
    torch.onnx.export(
        model, (ids, mask), str(out_dir / "model.onnx"),
        input_names=["input_ids", "attention_mask"], output_names=["logits"],
        dynamic_axes={"input_ids": {0: "batch", 1: "seq"},
                      "attention_mask": {0: "batch", 1: "seq"},
                      "logits": {0: "batch"}},
        opset_version=17, dynamo=False)
    tok.save(str(out_dir / "tokenizer.json"))

    sess = ort.InferenceSession(str(out_dir / "model.onnx"))
    with open(out_dir / "parity.jsonl", "w") as fh:
        for text in parity_texts:
            e = tok.encode(text).ids
            feed = {"input_ids": np.array([e], dtype=np.int64),
                    "attention_mask": np.ones((1, len(e)), dtype=np.int64)}
            logits = sess.run(["logits"], feed)[0][0].astype(np.float64)
            if card["task"] == "multiclass":
                p = np.exp(logits - logits.max())
                p /= p.sum()
                row = {"text": text, "scores": [float(v) for v in p]}
            else:
                row = {"text": text, "score": float(1.0 / (1.0 + np.exp(-logits[0])))}
            fh.write(json.dumps(row) + "\n")
    with open(out_dir / "card.json", "w") as fh:
        json.dump(card, fh, indent=2)
        fh.write("\n")


def main():
    rng = random.Random(7)
    torch.manual_seed(7)
    corpus = []
    for cat in CATEGORIES:
        for _ in range(20):
            corpus.append((make_text(rng, cat, td=rng.random() < 0.5), cat))
    texts = [t for t, _ in corpus]
    tok = train_tokenizer(texts, "/tmp/_tok.json")
    vocab = tok.get_vocab_size()

    parity = [make_text(rng, rng.choice(CATEGORIES), td=rng.random() < 0.5)
              for _ in range(60)]
    long_text = " ".join(make_text(rng, "Build", td=True) for _ in range(80))
    parity += [long_text, "", "emoji-free but UPPER and digits 12345 x!",
               "caf\u00e9 na\u00efve r\u00e9sum\u00e9 \U0001F680 ok's it'll"]

    base_card = {"format_version": 1, "max_length": MAX_LEN,
                 "truncation": "head", "export_timestamp": "2024-06-01T00:00:00Z",
                 "input_names": ["input_ids", "attention_mask"],
                 "output_name": "logits",
                 "optimizer": "adamw", "learning_rate": 2e-05, "batch_size": 16}

    td = PooledHead(vocab, 1)
    td_targets = [1 if any(w in t.split() for w in
                           ("hack", "workaround", "todo", "legacy", "debt")) else 0
                  for t in texts]
    fit(td, tok, texts, td_targets, multiclass=False)
    export(td, OUT / "td", tok, parity,
           dict(base_card, task="td", category=None, label_order=["non-td", "td"]))

    mc = PooledHead(vocab, len(CATEGORIES))
    fit(mc, tok, texts, [CATEGORIES.index(c) for _, c in corpus], multiclass=True)
    export(mc, OUT / "multiclass", tok, parity,
           dict(base_card, task="multiclass", category=None, label_order=CATEGORIES))


if __name__ == "__main__":
    main()
