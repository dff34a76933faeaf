#!/usr/bin/env python3
"""Score a stimulus file with a Hugging Face causal LM and write a model cache
that the `precomputed` backend reads.

    icprobe gen --kind referential --pronoun she --output ref_she.jsonl
    python3 tools/hf_score.py --model gpt2 --stimuli ref_she.jsonl --out cache/gpt2.jsonl
    ICPROBE_MODEL_CACHE=cache icprobe run --experiment E1 --backend precomputed --param model=gpt2 ...

One output line per stimulus:
  words            the stimulus words
  word_spans       [begin, end) token span of each word
  token_surprisal  surprisal of each token in bits
  hidden           optional, [layer][token][dim] (with --hidden)
  next             optional, word -> probability of the next word; the rest goes to "<other>"
                   (written for completion stimuli, which end before the verb)
"""

import argparse
import json
import math
import sys


def load_stimuli(path):
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                yield json.loads(line)


def encode(tok, words):
    ids, spans = [], []
    for i, w in enumerate(words):
        piece = tok.encode(w if i == 0 else " " + w, add_special_tokens=False)
        spans.append([len(ids), len(ids) + len(piece)])
        ids.extend(piece)
    return ids, spans


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--model", required=True)
    ap.add_argument("--stimuli", required=True, nargs="+")
    ap.add_argument("--out", required=True)
    ap.add_argument("--hidden", action="store_true", help="store hidden states of every layer")
    ap.add_argument("--top", type=int, default=500, help="next-word candidates kept per completion stimulus")
    ap.add_argument("--device", default="cpu")
    args = ap.parse_args()

    import torch
    from transformers import AutoModelForCausalLM, AutoTokenizer

    tok = AutoTokenizer.from_pretrained(args.model)
    model = AutoModelForCausalLM.from_pretrained(args.model).to(args.device).eval()
    bos = tok.bos_token_id if tok.bos_token_id is not None else tok.eos_token_id
    ln2 = math.log(2.0)

    seen = set()
    with open(args.out, "w") as out, torch.no_grad():
        for path in args.stimuli:
            for stim in load_stimuli(path):
                words = stim["words"]
                key = " ".join(words)
                if key in seen:
                    continue
                seen.add(key)
                ids, spans = encode(tok, words)
                x = torch.tensor([[bos] + ids], device=args.device)
                res = model(x, output_hidden_states=args.hidden)
                logp = torch.log_softmax(res.logits[0].float(), dim=-1)
                target = torch.tensor(ids, device=args.device)
                surprisal = (-logp[:-1].gather(1, target[:, None])[:, 0] / ln2).tolist()
                rec = {"words": words, "word_spans": spans, "token_surprisal": surprisal}
                if args.hidden:
                    # Layer 0 is the embedding output; drop the BOS position.
                    rec["hidden"] = [h[0, 1:].float().tolist() for h in res.hidden_states[1:]]
                if stim.get("kind") == "completion":
                    probs = logp[-1].exp()
                    top = torch.topk(probs, args.top)
                    nxt = {}
                    for p, i in zip(top.values.tolist(), top.indices.tolist()):
                        w = tok.decode([i]).strip()
                        if w and w.isalpha():
                            nxt[w] = nxt.get(w, 0.0) + p
                    nxt["<other>"] = max(0.0, 1.0 - sum(nxt.values()))
                    rec["next"] = nxt
                out.write(json.dumps(rec) + "\n")
    print(f"wrote {len(seen)} entries to {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
