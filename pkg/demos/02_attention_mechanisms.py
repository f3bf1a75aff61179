"""Compare the alignment mechanisms on one toy example: additive
(concat-product) scores, gated-projection (bilinear) scores, and the two-hop
variant bridged by transcript states."""
import numpy as np

from mmsum.attention import (AttnSet, bihop_context, bilinear_scores,
                             concat_product_scores, context, last_state_context)
from mmsum.autodiff import Tensor

rng = np.random.default_rng(0)
d, da = 6, 4
t = lambda shape: Tensor(rng.uniform(-0.8, 0.8, shape))

sentences = Tensor(rng.normal(size=(3, d)))   # 3 sentence states
frames = Tensor(rng.normal(size=(5, d)))      # 5 frame states
transcript = Tensor(rng.normal(size=(4, d)))  # 4 transcript token states

additive = AttnSet(W_q=t((d, da)), W_k=t((d, da)), V=t((da,)), b_joint=t((da,)))
gated = AttnSet(W_q=t((d, da)), W_k=t((d, da)), V=t((da,)), b_q=t((da,)), b_k=t((da,)))
hop2 = AttnSet(W_q=t((d, da)), W_k=t((d, da)), V=t((da,)), b_q=t((da,)), b_k=t((da,)))

np.set_printoptions(precision=3, suppress=True)

print("=== additive scores e_ij = v.tanh(Wq s_i + Wk m_j + b) ===")
scores = concat_product_scores(sentences, frames, additive)
ctx = context(scores, frames)
print("weights (rows sum to 1):")
print(ctx.weights.data)

print("\n=== gated-projection scores e_ij = v.(q*r + q + r) ===")
ctx = context(bilinear_scores(sentences, frames, gated), frames)
print(ctx.weights.data)

print("\n=== two-hop through the transcript ===")
ctx = bihop_context(sentences, transcript, frames, gated, hop2)
print("sentence-over-transcript weights:")
print(ctx.weights.data)
print("context shape:", ctx.contexts.data.shape)

print("\n=== collapse case: a single transcript token ===")
one_tok = Tensor(rng.normal(size=(1, d)))
ctx = bihop_context(sentences, one_tok, frames, gated, hop2)
print("second-hop weights are exactly 1:")
print(ctx.weights.data.ravel())

print("\n=== no attention: every query takes the last frame state ===")
ctx = last_state_context(frames, n_queries=3)
print(ctx.weights.data)
