"""Dataset schema, on-disk formats, and the synthetic corpus generator.

On-disk formats:

* Manifest: JSON with ``{"samples": [{"id", "document", "features",
  "transcript", "summary", "ref_features"?}], "split": {"<id>": "train|val|test"}}``.
  File paths are relative to the manifest's directory.
* Feature file: magic bytes ``M2SMFEAT``, two little-endian uint32 (rows,
  cols), then rows*cols little-endian float32 values in row-major order.
* Document / transcript / summary: UTF-8 text, one sentence per line.

Tokenization is lowercase, split on Unicode whitespace, with Unicode
punctuation stripped from token edges.
"""
from __future__ import annotations

import json
import struct
import unicodedata
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, IngestionError, SchemaError, SplitError

FEATURE_MAGIC = b"M2SMFEAT"
UNK_TOKEN = "<unk>"


# ---------------------------------------------------------------------------
# tokenization / vocabulary

def tokenize(text: str) -> list[str]:
    tokens = []
    for raw in text.lower().split():
        start, stop = 0, len(raw)
        while start < stop and unicodedata.category(raw[start]).startswith("P"):
            start += 1
        while stop > start and unicodedata.category(raw[stop - 1]).startswith("P"):
            stop -= 1
        if stop > start:
            tokens.append(raw[start:stop])
    return tokens


def build_vocab(texts) -> dict[str, int]:
    """Deterministic vocabulary: sorted unique tokens, index 0 is <unk>."""
    seen = set()
    for text in texts:
        seen.update(tokenize(text))
    vocab = {UNK_TOKEN: 0}
    for tok in sorted(seen):
        vocab[tok] = len(vocab)
    return vocab


def encode_tokens(tokens, vocab) -> np.ndarray:
    unk = vocab[UNK_TOKEN]
    return np.array([vocab.get(t, unk) for t in tokens], dtype=np.int64)


# ---------------------------------------------------------------------------
# domain types

@dataclass
class Document:
    sentences: list[np.ndarray]      # token ids per sentence
    raw_sentences: list[str]
    id: str


@dataclass
class VideoFeatures:
    frames: np.ndarray               # (NM_raw, D_v) float
    fps_group: int = 1


@dataclass
class Transcript:
    tokens: np.ndarray               # token ids, possibly empty
    raw_text: str


@dataclass
class Sample:
    document: Document
    video: VideoFeatures
    transcript: Transcript
    gold_summary: list[str]
    ref_image_features: np.ndarray | None = None


@dataclass
class ManifestEntry:
    id: str
    document: str
    features: str
    transcript: str
    summary: str
    ref_features: str | None = None


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    split: dict[str, str] = field(default_factory=dict)
    root: Path = Path(".")

    def ids(self):
        return [e.id for e in self.entries]

    def entries_for(self, split_name: str):
        return [e for e in self.entries if self.split.get(e.id) == split_name]


# ---------------------------------------------------------------------------
# binary feature files

def write_feature_file(path, matrix) -> None:
    m = np.asarray(matrix, dtype=np.float32)
    if m.ndim != 2:
        raise FormatError(f"feature matrix must be 2-D, got shape {m.shape}")
    rows, cols = m.shape
    payload = m.astype("<f4", copy=False).tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<II", rows, cols))
        fh.write(payload)


def read_feature_file(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:8] != FEATURE_MAGIC:
        raise FormatError(f"bad magic in feature file {path}")
    if len(blob) < 16:
        raise FormatError(f"truncated header in feature file {path}")
    rows, cols = struct.unpack("<II", blob[8:16])
    expected = 16 + rows * cols * 4
    if len(blob) != expected:
        raise FormatError(
            f"feature file {path} declares {rows}x{cols} "
            f"({expected} bytes) but has {len(blob)} bytes")
    flat = np.frombuffer(blob, dtype="<f4", offset=16)
    return flat.reshape(rows, cols).copy()


# ---------------------------------------------------------------------------
# manifest

def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "samples" not in doc:
        raise SchemaError(f"manifest {path} missing top-level 'samples'")

    root = path.parent
    entries, seen = [], set()
    for raw in doc["samples"]:
        for key in ("id", "document", "features", "transcript", "summary"):
            if key not in raw:
                raise SchemaError(f"manifest entry missing '{key}': {raw}")
        if raw["id"] in seen:
            raise SchemaError(f"duplicate sample id '{raw['id']}' in manifest")
        seen.add(raw["id"])
        entry = ManifestEntry(
            id=raw["id"],
            document=raw["document"],
            features=raw["features"],
            transcript=raw["transcript"],
            summary=raw["summary"],
            ref_features=raw.get("ref_features"),
        )
        for rel in (entry.document, entry.features, entry.transcript, entry.summary,
                    entry.ref_features):
            if rel is not None and not (root / rel).is_file():
                raise IngestionError(f"missing file referenced by manifest: {root / rel}")
        entries.append(entry)

    split = doc.get("split", {})
    for sid, name in split.items():
        if name not in ("train", "val", "test"):
            raise SchemaError(f"invalid split name '{name}' for id '{sid}'")
        if sid not in seen:
            raise SchemaError(f"split references unknown id '{sid}'")
    return DatasetManifest(entries=entries, split=dict(split), root=root)


def save_manifest(manifest: DatasetManifest, path) -> None:
    doc = {
        "samples": [
            {k: v for k, v in (
                ("id", e.id), ("document", e.document), ("features", e.features),
                ("transcript", e.transcript), ("summary", e.summary),
                ("ref_features", e.ref_features)) if v is not None}
            for e in manifest.entries
        ],
        "split": {sid: manifest.split[sid] for sid in sorted(manifest.split)},
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


# ---------------------------------------------------------------------------
# sample loading

def _read_lines(path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    return [line for line in text.splitlines() if line.strip()]


def load_sample(manifest: DatasetManifest, entry: ManifestEntry, vocab,
                min_frames: int = 1) -> Sample:
    root = manifest.root
    raw_sentences = _read_lines(root / entry.document)
    if not raw_sentences:
        raise IngestionError(f"document has no sentences: {entry.document}")
    sentences = []
    for line in raw_sentences:
        toks = tokenize(line)
        if not toks:
            raise IngestionError(f"sentence tokenizes to nothing in {entry.document}: {line!r}")
        sentences.append(encode_tokens(toks, vocab))

    frames = read_feature_file(root / entry.features)
    if frames.shape[0] < min_frames:
        raise IngestionError(
            f"sample {entry.id} has {frames.shape[0]} frames, below minimum {min_frames}")
    if not np.all(np.isfinite(frames)):
        raise IngestionError(f"non-finite frame features in {entry.features}")

    transcript_text = Path(root / entry.transcript).read_text(encoding="utf-8")
    transcript_tokens = encode_tokens(tokenize(transcript_text), vocab)

    gold = _read_lines(root / entry.summary)
    refs = read_feature_file(root / entry.ref_features) if entry.ref_features else None
    if refs is not None and refs.shape[1] != frames.shape[1]:
        raise IngestionError(
            f"ref feature dim {refs.shape[1]} != frame feature dim {frames.shape[1]} "
            f"for sample {entry.id}")

    return Sample(
        document=Document(sentences=sentences, raw_sentences=raw_sentences, id=entry.id),
        video=VideoFeatures(frames=frames),
        transcript=Transcript(tokens=transcript_tokens, raw_text=transcript_text),
        gold_summary=gold,
        ref_image_features=refs,
    )


def load_dataset(manifest: DatasetManifest, vocab=None, min_frames: int = 1):
    """Load all samples. Builds the vocabulary from documents + transcripts
    when none is supplied (the checkpoint owns it afterwards)."""
    if vocab is None:
        texts = []
        for e in manifest.entries:
            texts.append(Path(manifest.root / e.document).read_text(encoding="utf-8"))
            texts.append(Path(manifest.root / e.transcript).read_text(encoding="utf-8"))
        vocab = build_vocab(texts)
    samples = [load_sample(manifest, e, vocab, min_frames=min_frames)
               for e in manifest.entries]
    return samples, vocab


# ---------------------------------------------------------------------------
# frame subsampling

def sample_rng_seed(base_seed: int, sample_id: str) -> int:
    return (int(base_seed) * 1_000_003 + zlib.crc32(sample_id.encode("utf-8"))) % 2**32


def subsample_frames(video: VideoFeatures, seed: int) -> VideoFeatures:
    """Keep one frame per group of ``fps_group`` consecutive frames, chosen
    uniformly within each group by a seeded RNG."""
    g = int(video.fps_group)
    if g < 1:
        raise ConfigError(f"fps_group must be >= 1, got {g}")
    n = video.frames.shape[0]
    if g == 1:
        return VideoFeatures(frames=video.frames.copy(), fps_group=1)
    rng = np.random.default_rng(seed)
    picks = []
    for lo in range(0, n, g):
        hi = min(lo + g, n)
        picks.append(int(rng.integers(lo, hi)))
    return VideoFeatures(frames=video.frames[picks].copy(), fps_group=1)


def prepare_for_model(sample: Sample, fps_group: int, base_seed: int) -> Sample:
    """Apply frame subsampling ahead of encoding; the per-sample seed is
    derived from the run seed and the sample id, so training and evaluation
    see identical frames."""
    if fps_group <= 1:
        return sample
    video = VideoFeatures(frames=sample.video.frames, fps_group=fps_group)
    sub = subsample_frames(video, sample_rng_seed(base_seed, sample.document.id))
    return replace(sample, video=sub)


# ---------------------------------------------------------------------------
# dataset splitting

def split_dataset(manifest: DatasetManifest, fractions=(0.7, 0.1, 0.2),
                  seed: int = 0) -> DatasetManifest:
    """Seeded shuffle + floor-based partition. Remainder goes to train; val
    and test are guaranteed nonempty."""
    ft, fv, fs = fractions
    if min(ft, fv, fs) <= 0:
        raise SplitError(f"fractions must be positive, got {fractions}")
    if abs(ft + fv + fs - 1.0) > 1e-9:
        raise SplitError(f"fractions must sum to 1, got {fractions}")
    ids = manifest.ids()
    n = len(ids)
    if n < 3:
        raise SplitError(f"need at least 3 samples to split, got {n}")

    rng = np.random.default_rng(seed)
    order = [ids[i] for i in rng.permutation(n)]
    n_val = max(1, int(np.floor(fv * n)))
    n_test = max(1, int(np.floor(fs * n)))
    n_train = n - n_val - n_test
    if n_train < 1:
        raise SplitError(f"split leaves no training samples for n={n}")

    split = {}
    for sid in order[:n_train]:
        split[sid] = "train"
    for sid in order[n_train:n_train + n_val]:
        split[sid] = "val"
    for sid in order[n_train + n_val:]:
        split[sid] = "test"
    return DatasetManifest(entries=manifest.entries, split=split, root=manifest.root)


# ---------------------------------------------------------------------------
# synthetic corpus

@dataclass
class SynthConfig:
    n_samples: int = 20
    n_sentences: int = 10
    sentence_len: int = 8
    n_frames: int = 8
    feature_dim: int = 16
    vocab_size: int = 120
    salience: float = 0.3
    noise: float = 0.1
    transcript_len: int = 24
    transcript_overlap: float = 0.6
    distractor_rate: float = 0.08
    with_refs: bool = True


def _word(i: int) -> str:
    return f"w{i:03d}"


def synth_generate(config: SynthConfig, seed: int, out_dir) -> DatasetManifest:
    """Materialize a synthetic corpus with planted salient sentences/frames.

    Salient sentences carry sample-specific topic tokens and are copied
    verbatim into the gold summary; salient frame vectors share one latent
    direction (plus noise); the transcript resamples tokens from the salient
    sentences. Ground-truth masks are written to ``<id>.masks.json`` next to
    each sample for test use.
    """
    if not (0.0 < config.salience < 1.0):
        raise ConfigError(f"salience must be in (0, 1), got {config.salience}")
    if config.vocab_size < 20:
        raise ConfigError(f"vocab_size must be >= 20, got {config.vocab_size}")
    if config.n_sentences < 2 or config.sentence_len < 1 or config.n_frames < 1:
        raise ConfigError("synthetic corpus needs >= 2 sentences and >= 1 token/frame")

    out_dir = Path(out_dir)
    sample_dir = out_dir / "samples"
    sample_dir.mkdir(parents=True, exist_ok=True)

    topic_start = int(config.vocab_size * 0.8)
    general_pool = np.arange(0, topic_start)
    topic_pool = np.arange(topic_start, config.vocab_size)

    master = np.random.SeedSequence(seed)
    entries = []
    for snum, child in enumerate(master.spawn(config.n_samples)):
        rng = np.random.default_rng(child)
        sid = f"s{snum:03d}"

        ns = config.n_sentences
        n_sal = max(1, round(ns * config.salience))
        sal_idx = np.sort(rng.choice(ns, size=n_sal, replace=False))
        topic = rng.choice(topic_pool, size=6, replace=False)

        sentences, seen_text = [], set()
        for i in range(ns):
            while True:
                toks = []
                for _ in range(config.sentence_len):
                    if i in sal_idx and rng.random() < 0.5:
                        toks.append(int(rng.choice(topic)))
                    elif i not in sal_idx and rng.random() < config.distractor_rate:
                        toks.append(int(rng.choice(topic_pool)))
                    else:
                        toks.append(int(rng.choice(general_pool)))
                text = " ".join(_word(t) for t in toks)
                if text not in seen_text:
                    seen_text.add(text)
                    sentences.append((toks, text))
                    break

        nf = config.n_frames
        n_sal_f = max(1, round(nf * config.salience))
        sal_frames = np.sort(rng.choice(nf, size=n_sal_f, replace=False))
        latent = rng.normal(size=config.feature_dim)
        latent /= np.linalg.norm(latent)
        frames = np.empty((nf, config.feature_dim), dtype=np.float64)
        for j in range(nf):
            if j in sal_frames:
                base = latent
            else:
                v = rng.normal(size=config.feature_dim)
                base = v / np.linalg.norm(v)
            frames[j] = base + config.noise * rng.normal(size=config.feature_dim)

        sal_token_bag = [t for i in sal_idx for t in sentences[i][0]]
        tr_toks = []
        for _ in range(config.transcript_len):
            if rng.random() < config.transcript_overlap:
                tr_toks.append(sal_token_bag[int(rng.integers(len(sal_token_bag)))])
            else:
                tr_toks.append(int(rng.choice(general_pool)))
        transcript = " ".join(_word(t) for t in tr_toks)

        doc_path = f"samples/{sid}.doc.txt"
        feat_path = f"samples/{sid}.features.bin"
        tr_path = f"samples/{sid}.transcript.txt"
        sum_path = f"samples/{sid}.summary.txt"
        (out_dir / doc_path).write_text(
            "\n".join(text for _, text in sentences) + "\n", encoding="utf-8")
        write_feature_file(out_dir / feat_path, frames)
        (out_dir / tr_path).write_text(transcript + "\n", encoding="utf-8")
        (out_dir / sum_path).write_text(
            "\n".join(sentences[i][1] for i in sal_idx) + "\n", encoding="utf-8")

        ref_path = None
        if config.with_refs:
            ref_path = f"samples/{sid}.refs.bin"
            write_feature_file(out_dir / ref_path, frames[sal_frames])

        masks = {
            "salient_sentences": [int(i in sal_idx) for i in range(ns)],
            "salient_frames": [int(j in sal_frames) for j in range(nf)],
        }
        (sample_dir / f"{sid}.masks.json").write_text(
            json.dumps(masks, sort_keys=True) + "\n", encoding="utf-8")

        entries.append(ManifestEntry(id=sid, document=doc_path, features=feat_path,
                                     transcript=tr_path, summary=sum_path,
                                     ref_features=ref_path))

    manifest = DatasetManifest(entries=entries, root=out_dir)
    manifest = split_dataset(manifest, seed=seed)
    save_manifest(manifest, out_dir / "manifest.json")
    return manifest


def load_masks(manifest: DatasetManifest, sample_id: str) -> dict:
    path = manifest.root / "samples" / f"{sample_id}.masks.json"
    return json.loads(path.read_text(encoding="utf-8"))
