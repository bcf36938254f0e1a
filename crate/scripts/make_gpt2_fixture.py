"""Build a tiny randomly initialised GPT-2 with Hugging Face transformers and
freeze its per-layer hidden states and output logits as a reference fixture.

The Rust forward pass is checked against this independent implementation.
"""
import json
import os
import sys

import torch
from safetensors.torch import save_file
from transformers import GPT2Config, GPT2LMHeadModel

out_dir = sys.argv[1]
os.makedirs(out_dir, exist_ok=True)
torch.manual_seed(20240611)

cfg = GPT2Config(
    vocab_size=40,
    n_positions=16,
    n_embd=16,
    n_layer=2,
    n_head=4,
    layer_norm_epsilon=1e-5,
    resid_pdrop=0.0,
    embd_pdrop=0.0,
    attn_pdrop=0.0,
)
model = GPT2LMHeadModel(cfg).eval()
with torch.no_grad():
    for name, p in model.named_parameters():
        p.copy_(torch.randn_like(p) * (0.3 if p.ndim > 1 else 0.1))
        if name.endswith("ln_1.weight") or name.endswith("ln_2.weight") or name.endswith("ln_f.weight"):
            p.add_(1.0)

tensors = {k: v.detach().contiguous() for k, v in model.transformer.state_dict().items() if not k.endswith(".attn.bias") and not k.endswith(".attn.masked_bias")}
save_file(tensors, os.path.join(out_dir, "model.safetensors"))

with open(os.path.join(out_dir, "config.json"), "w") as f:
    json.dump({"n_layers": 2, "d_model": 16, "n_heads": 4, "vocab_size": 40, "max_context": 16, "ln_epsilon": 1e-5}, f, indent=1)

sequences = [[3], [5, 17, 2, 39, 0, 11, 8], list(range(16))]
cases = []
with torch.no_grad():
    for ids in sequences:
        o = model(torch.tensor([ids]), output_hidden_states=True)
        hs = o.hidden_states
        # hidden_states[-1] already has ln_f applied; keep block outputs for
        # layers 0..n_layer-1 and the post-ln_f final state separately.
        cases.append({
            "ids": ids,
            "hidden_states": [h[0].tolist() for h in hs[:-1]],
            "final_normed": hs[-1][0].tolist(),
            "logits": o.logits[0].tolist(),
        })
with open(os.path.join(out_dir, "reference.json"), "w") as f:
    json.dump(cases, f)
print(sorted(tensors.keys()))
