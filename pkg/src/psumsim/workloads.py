"""Model-to-GEMM workload tables, workload file I/O and synthetic tensors.

Each builtin maps a network to the list of MAC layers it executes, expressed
in the input-channel/output-channel GEMM view of the tiling module:

* transformer projections and FFN matmuls keep their hidden dimensions;
* attention score/context matmuls appear per head (head dim as c_i or c_o,
  key positions as the other side, query positions as the token grid);
* convolutions (patch embeddings, stems, depthwise 3x3/5x5) are lowered via
  im2col, so a KxK conv over C channels becomes c_i = C * K * K with k = 1,
  and a depthwise KxK becomes c_i = K * K applied to c_o = C channels.

Hidden dimensions come from the models' public architecture definitions
(BERT-Base 768/3072 with 12 heads; SegFormer MiT-B0 stage widths 32/64/160/
256, spatial-reduction ratios 8/4/2/1, MLP ratio 4; EfficientViT-B1 widths
16/32/64/128/256 with MBConv expand 4 and 16-dim attention heads;
LLaMA2-7B 4096/11008 with 32 heads) and are isolated in the table builders
below so a correction is a one-line edit.  Vision models are tabulated at
512x512 input; only backbone/encoder MAC layers are counted (no softmax,
normalization, pooling or decode heads).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .energy import BufferConfig
from .tiling import LayerShape, Parallelism


@dataclass(frozen=True)
class LayerEntry:
    label: str
    shape: LayerShape
    repeat: int = 1

    def __post_init__(self) -> None:
        if self.repeat < 1:
            raise ValueError(f"repeat must be >= 1, got {self.repeat}")


@dataclass(frozen=True)
class WorkloadSpec:
    name: str
    parallelism: Parallelism
    buffers: BufferConfig
    layers: tuple[LayerEntry, ...]

    def __post_init__(self) -> None:
        if not self.layers:
            raise ValueError("workload needs at least one layer")
        object.__setattr__(self, "layers", tuple(self.layers))


# MAC-array presets: P_o=16, P_ci=8, P_co=8 for the encoder models; the
# LLM preset drops P_o to 1 because decode feature maps are single tokens.
TRANSFORMER_PARALLELISM = Parallelism(p_o=16, p_ci=8, p_co=8, p_ih=4, p_iw=4)
LLM_PARALLELISM = Parallelism(p_o=1, p_ci=32, p_co=32, p_ih=1, p_iw=1)

DEFAULT_BUFFERS = BufferConfig()  # 256 KiB ifmap / 128 KiB weight / 256 KiB ofmap


def _gemm(label: str, ci: int, co: int, ho: int, wo: int, repeat: int = 1) -> LayerEntry:
    return LayerEntry(label, LayerShape(c_i=ci, c_o=co, h_o=ho, w_o=wo), repeat)


def _bert_base_128() -> WorkloadSpec:
    hidden, ffn, heads, blocks = 768, 3072, 12, 12
    head_dim = hidden // heads
    tokens_h, tokens_w = 16, 8  # 128 tokens on a near-square grid
    n = tokens_h * tokens_w
    layers = [
        _gemm("attn_q", hidden, hidden, tokens_h, tokens_w, blocks),
        _gemm("attn_k", hidden, hidden, tokens_h, tokens_w, blocks),
        _gemm("attn_v", hidden, hidden, tokens_h, tokens_w, blocks),
        _gemm("attn_scores", head_dim, n, tokens_h, tokens_w, blocks * heads),
        _gemm("attn_context", n, head_dim, tokens_h, tokens_w, blocks * heads),
        _gemm("attn_out", hidden, hidden, tokens_h, tokens_w, blocks),
        _gemm("ffn_up", hidden, ffn, tokens_h, tokens_w, blocks),
        _gemm("ffn_down", ffn, hidden, tokens_h, tokens_w, blocks),
    ]
    return WorkloadSpec("bert-base-128", TRANSFORMER_PARALLELISM, DEFAULT_BUFFERS,
                        tuple(layers))


def _segformer_b0() -> WorkloadSpec:
    # MiT-B0 encoder at 512x512: stage widths / depths / SR ratios / heads.
    widths = (32, 64, 160, 256)
    depths = (2, 2, 2, 2)
    sr = (8, 4, 2, 1)
    heads = (1, 2, 5, 8)
    grids = ((128, 128), (64, 64), (32, 32), (16, 16))
    mlp_ratio = 4
    embeds = (
        ("pe1", 3, 7, widths[0], grids[0]),
        ("pe2", widths[0], 3, widths[1], grids[1]),
        ("pe3", widths[1], 3, widths[2], grids[2]),
        ("pe4", widths[2], 3, widths[3], grids[3]),
    )
    layers: list[LayerEntry] = []
    for label, cin, k, cout, (h, w) in embeds:
        layers.append(_gemm(label, cin * k * k, cout, h, w))
    for s in range(4):
        c, d, r, nh = widths[s], depths[s], sr[s], heads[s]
        h, w = grids[s]
        kh, kw = h // r, w // r
        head_dim = c // nh
        tag = f"s{s + 1}"
        layers.append(_gemm(f"{tag}_attn_q", c, c, h, w, d))
        if r > 1:
            layers.append(_gemm(f"{tag}_attn_sr", c * r * r, c, kh, kw, d))
        layers.append(_gemm(f"{tag}_attn_k", c, c, kh, kw, d))
        layers.append(_gemm(f"{tag}_attn_v", c, c, kh, kw, d))
        layers.append(_gemm(f"{tag}_attn_scores", head_dim, kh * kw, h, w, d * nh))
        layers.append(_gemm(f"{tag}_attn_context", kh * kw, head_dim, h, w, d * nh))
        layers.append(_gemm(f"{tag}_attn_out", c, c, h, w, d))
        layers.append(_gemm(f"{tag}_ffn_fc1", c, mlp_ratio * c, h, w, d))
        layers.append(_gemm(f"{tag}_ffn_dw", 9, mlp_ratio * c, h, w, d))
        layers.append(_gemm(f"{tag}_ffn_fc2", mlp_ratio * c, c, h, w, d))
    return WorkloadSpec("segformer-b0", TRANSFORMER_PARALLELISM, DEFAULT_BUFFERS,
                        tuple(layers))


def _efficientvit_b1() -> WorkloadSpec:
    # EfficientViT-B1 backbone at 512x512: stem 16 @ /2, stages 32/64/128/256
    # at /4../32, MBConv expand 4, linear attention with 16-dim heads.
    layers: list[LayerEntry] = []

    def mbconv(tag: str, cin: int, cout: int, res_in: int, res_out: int,
               expand: int = 4, repeat: int = 1) -> None:
        mid = cin * expand
        layers.append(_gemm(f"{tag}_expand", cin, mid, res_in, res_in, repeat))
        layers.append(_gemm(f"{tag}_dw", 9, mid, res_out, res_out, repeat))
        layers.append(_gemm(f"{tag}_project", mid, cout, res_out, res_out, repeat))

    def attention(tag: str, c: int, res: int, repeat: int = 1) -> None:
        head_dim = 16
        heads = c // head_dim
        n = res * res
        layers.append(_gemm(f"{tag}_qkv", c, 3 * c, res, res, repeat))
        layers.append(_gemm(f"{tag}_aggreg", 25, 3 * c, res, res, repeat))
        # Linear attention: K^T V (d x N by N x d+1), then Q (K^T V).
        layers.append(LayerEntry(f"{tag}_ktv",
                                 LayerShape(c_i=n, c_o=head_dim + 1, h_o=head_dim, w_o=1),
                                 repeat * heads))
        layers.append(_gemm(f"{tag}_qktv", head_dim, head_dim + 1, res, res,
                            repeat * heads))
        layers.append(_gemm(f"{tag}_proj", c, c, res, res, repeat))

    layers.append(_gemm("stem_conv", 3 * 9, 16, 256, 256))
    layers.append(_gemm("stem_dw", 9, 16, 256, 256))
    layers.append(_gemm("stem_pw", 16, 16, 256, 256))
    mbconv("s1b1", 16, 32, 256, 128)
    mbconv("s1b2", 32, 32, 128, 128)
    mbconv("s2b1", 32, 64, 128, 64)
    mbconv("s2b2", 64, 64, 64, 64, repeat=2)
    mbconv("s3b1", 64, 128, 64, 32)
    for b in (2, 3):
        attention(f"s3b{b}_att", 128, 32)
        mbconv(f"s3b{b}_mb", 128, 128, 32, 32)
    mbconv("s4b1", 128, 256, 32, 16)
    for b in (2, 3, 4):
        attention(f"s4b{b}_att", 256, 16)
        mbconv(f"s4b{b}_mb", 256, 256, 16, 16)
    return WorkloadSpec("efficientvit-b1", TRANSFORMER_PARALLELISM, DEFAULT_BUFFERS,
                        tuple(layers))


def _llama_layers(tokens: int, kv_positions: int, suffix: str) -> list[LayerEntry]:
    hidden, ffn, heads, blocks = 4096, 11008, 32, 32
    head_dim = hidden // heads
    ho, wo = (tokens, 1)
    layers = [
        _gemm(f"attn_q{suffix}", hidden, hidden, ho, wo, blocks),
        _gemm(f"attn_k{suffix}", hidden, hidden, ho, wo, blocks),
        _gemm(f"attn_v{suffix}", hidden, hidden, ho, wo, blocks),
        _gemm(f"attn_scores{suffix}", head_dim, kv_positions, ho, wo, blocks * heads),
        _gemm(f"attn_context{suffix}", kv_positions, head_dim, ho, wo, blocks * heads),
        _gemm(f"attn_out{suffix}", hidden, hidden, ho, wo, blocks),
        _gemm(f"ffn_gate{suffix}", hidden, ffn, ho, wo, blocks),
        _gemm(f"ffn_up{suffix}", hidden, ffn, ho, wo, blocks),
        _gemm(f"ffn_down{suffix}", ffn, hidden, ho, wo, blocks),
    ]
    return layers


def _llama2_7b_prefill() -> WorkloadSpec:
    return WorkloadSpec("llama2-7b-prefill", LLM_PARALLELISM, DEFAULT_BUFFERS,
                        tuple(_llama_layers(4096, 4096, "")))


def _llama2_7b_decode() -> WorkloadSpec:
    # One generated token attending over a 4096-entry KV cache; the marginal
    # per-token cost of the autoregressive phase.
    return WorkloadSpec("llama2-7b-decode", LLM_PARALLELISM, DEFAULT_BUFFERS,
                        tuple(_llama_layers(1, 4096, "")))


def _llama2_7b() -> WorkloadSpec:
    layers = _llama_layers(4096, 4096, "_prefill") + _llama_layers(1, 4096, "_decode")
    return WorkloadSpec("llama2-7b", LLM_PARALLELISM, DEFAULT_BUFFERS, tuple(layers))


_BUILTINS: dict[str, Callable[[], WorkloadSpec]] = {
    "bert-base-128": _bert_base_128,
    "segformer-b0": _segformer_b0,
    "efficientvit-b1": _efficientvit_b1,
    "llama2-7b-prefill": _llama2_7b_prefill,
    "llama2-7b-decode": _llama2_7b_decode,
    "llama2-7b": _llama2_7b,
}


def builtin_names() -> list[str]:
    return sorted(_BUILTINS)


def builtin(name: str) -> WorkloadSpec:
    """Return a builtin workload table by name."""
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise ValueError(
            f"unknown workload {name!r}; valid names: {', '.join(builtin_names())}"
        ) from None


# ---------------------------------------------------------------------------
# Workload files: canonical JSON with a fixed key order and integer fields.
# ---------------------------------------------------------------------------

_LAYER_KEYS = ("label", "ci", "co", "ho", "wo", "k", "stride", "repeat")
_PAR_KEYS = ("po", "pci", "pco", "pih", "piw")
_BUF_KEYS = ("bi_bytes", "bw_bytes", "bo_bytes")


def serialize_workload(spec: WorkloadSpec) -> str:
    """Render a workload in the canonical file format (stable byte-wise)."""
    doc = {
        "name": spec.name,
        "parallelism": {
            "po": spec.parallelism.p_o,
            "pci": spec.parallelism.p_ci,
            "pco": spec.parallelism.p_co,
            "pih": spec.parallelism.p_ih,
            "piw": spec.parallelism.p_iw,
        },
        "buffers": {
            "bi_bytes": spec.buffers.b_i,
            "bw_bytes": spec.buffers.b_w,
            "bo_bytes": spec.buffers.b_o,
        },
        "layers": [
            {
                "label": e.label,
                "ci": e.shape.c_i,
                "co": e.shape.c_o,
                "ho": e.shape.h_o,
                "wo": e.shape.w_o,
                "k": e.shape.k,
                "stride": e.shape.stride,
                "repeat": e.repeat,
            }
            for e in spec.layers
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def _require_keys(obj: dict, expected: Sequence[str], where: str) -> None:
    unknown = set(obj) - set(expected)
    if unknown:
        raise ValueError(f"{where}: unknown keys {sorted(unknown)}")
    missing = [k for k in expected if k not in obj]
    if missing:
        raise ValueError(f"{where}: missing keys {missing}")


def _as_int(obj: dict, key: str, where: str) -> int:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"{where}.{key}: expected an integer, got {value!r}")
    return value


def parse_workload(text: str, source: str = "<workload>") -> WorkloadSpec:
    """Parse and validate the canonical workload format."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{source}:{exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ValueError(f"{source}: top level must be an object")
    _require_keys(doc, ("name", "parallelism", "buffers", "layers"), source)
    if not isinstance(doc["name"], str) or not doc["name"]:
        raise ValueError(f"{source}.name: expected a non-empty string")
    par_obj, buf_obj = doc["parallelism"], doc["buffers"]
    _require_keys(par_obj, _PAR_KEYS, f"{source}.parallelism")
    _require_keys(buf_obj, _BUF_KEYS, f"{source}.buffers")
    try:
        par = Parallelism(
            p_o=_as_int(par_obj, "po", f"{source}.parallelism"),
            p_ci=_as_int(par_obj, "pci", f"{source}.parallelism"),
            p_co=_as_int(par_obj, "pco", f"{source}.parallelism"),
            p_ih=_as_int(par_obj, "pih", f"{source}.parallelism"),
            p_iw=_as_int(par_obj, "piw", f"{source}.parallelism"),
        )
        buf = BufferConfig(
            b_i=_as_int(buf_obj, "bi_bytes", f"{source}.buffers"),
            b_w=_as_int(buf_obj, "bw_bytes", f"{source}.buffers"),
            b_o=_as_int(buf_obj, "bo_bytes", f"{source}.buffers"),
        )
    except ValueError as exc:
        raise ValueError(f"{source}: {exc}") from exc
    if not isinstance(doc["layers"], list) or not doc["layers"]:
        raise ValueError(f"{source}.layers: expected a non-empty list")
    entries = []
    for idx, layer in enumerate(doc["layers"]):
        where = f"{source}.layers[{idx}]"
        if not isinstance(layer, dict):
            raise ValueError(f"{where}: expected an object")
        _require_keys(layer, _LAYER_KEYS, where)
        if not isinstance(layer["label"], str) or not layer["label"]:
            raise ValueError(f"{where}.label: expected a non-empty string")
        try:
            shape = LayerShape(
                c_i=_as_int(layer, "ci", where),
                c_o=_as_int(layer, "co", where),
                h_o=_as_int(layer, "ho", where),
                w_o=_as_int(layer, "wo", where),
                k=_as_int(layer, "k", where),
                stride=_as_int(layer, "stride", where),
            )
            entries.append(LayerEntry(layer["label"], shape,
                                      _as_int(layer, "repeat", where)))
        except ValueError as exc:
            raise ValueError(f"{where}: {exc}") from exc
    return WorkloadSpec(doc["name"], par, buf, tuple(entries))


def load_workload(path: str) -> WorkloadSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_workload(fh.read(), source=path)


def resolve_workload(name_or_path: str) -> WorkloadSpec:
    """Builtin name, or a path to a workload file."""
    if name_or_path in _BUILTINS:
        return builtin(name_or_path)
    if name_or_path.endswith(".json") or "/" in name_or_path or "\\" in name_or_path:
        return load_workload(name_or_path)
    raise ValueError(
        f"unknown workload {name_or_path!r}; valid names: {', '.join(builtin_names())} "
        f"(or pass a .json workload file)"
    )


# ---------------------------------------------------------------------------
# Synthetic tensors
# ---------------------------------------------------------------------------

DISTRIBUTIONS = ("uniform", "gaussian")


def synth_tensors(seed: int, shape: LayerShape, par: Parallelism,
                  distribution: str = "uniform", sigma: float = 0.25,
                  act_bits: int = 8, weight_bits: int = 8,
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Seeded operand codes for one output-tile GEMM.

    Returns (ifmap, weights) of shapes (p_o, c_i) and (c_i, p_co).
    "uniform" draws codes over the full signed range; "gaussian" draws
    normal(0, sigma * qmax) rounded and clipped, sigma expressed as a
    fraction of the positive code range.  Pure function of its arguments.
    """
    if distribution not in DISTRIBUTIONS:
        raise ValueError(f"unknown distribution {distribution!r}")
    rng = np.random.default_rng(seed)
    out = []
    for bits, tensor_shape in (
        (act_bits, (par.p_o, shape.c_i)),
        (weight_bits, (shape.c_i, par.p_co)),
    ):
        lo, hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
        if distribution == "uniform":
            codes = rng.integers(lo, hi + 1, size=tensor_shape, dtype=np.int64)
        else:
            raw = rng.normal(0.0, sigma * hi, size=tensor_shape)
            codes = np.clip(np.rint(raw), lo, hi).astype(np.int64)
        out.append(codes)
    return out[0], out[1]
