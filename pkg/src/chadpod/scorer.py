"""Boundary-probability scorers.

Three ways to score a (prefix, postfix) pair:

* :class:`BaselineScorer` — a from-scratch logistic regression over hashed
  character n-grams of the sentences adjacent to the boundary. No model
  downloads, no vocabulary files, fully deterministic.
* :class:`ExternalScorer` — a client for any process speaking the
  chadpod-scorer/1 wire protocol (see :mod:`chadpod.protocol`), reached
  over child-process stdio (``cmd:...``) or TCP (``tcp:host:port``).
* Small adapters (:class:`ConstantScorer`, :class:`OracleScorer`) used by
  the evaluation harness and the tests.

All scorers expose ``score_batch(requests) -> list of probabilities`` and
return results in request order.
"""

from __future__ import annotations

import json
import math
import os
import select
import shlex
import socket
import subprocess
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol as TypingProtocol
from typing import Sequence

import numpy as np

from . import protocol
from .dataset_builder import LABEL_BRANCH, LABEL_NO_BRANCH, LabeledExample
from .errors import (
    ConnectionFailedError,
    HandshakeError,
    MalformedResponseError,
    ProbabilityRangeError,
    ScorerError,
    ScorerTimeoutError,
    ServerReportedError,
)
from .text import split_sentences

FEATURIZER_VERSION = "hashgrams/1"

MODEL_FORMAT = "chadpod-baseline-model"
MODEL_FORMAT_VERSION = 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

_QUOTE_CHARS = "\"'‘’“”«»"


@dataclass(frozen=True)
class ScoreRequest:
    id: str
    prefix: str
    postfix: str

    def __post_init__(self):
        if not self.prefix or not self.postfix:
            raise ScorerError(f"request {self.id!r}: prefix and postfix must be non-empty")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.2
    epochs: int = 10
    l2: float = 1e-6
    seed: int = 0
    ngram_lo: int = 3
    ngram_hi: int = 5
    boundary_sentences: int = 3
    feature_dim: int = 2**18

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ScorerError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ScorerError("epochs must be >= 1")
        if self.l2 < 0:
            raise ScorerError("l2 must be >= 0")
        if self.ngram_lo > self.ngram_hi or self.ngram_lo < 1:
            raise ScorerError("need 1 <= ngram_lo <= ngram_hi")
        if self.boundary_sentences < 1:
            raise ScorerError("boundary_sentences must be >= 1")
        if self.feature_dim < 2 or self.feature_dim & (self.feature_dim - 1):
            raise ScorerError("feature_dim must be a power of two")


@dataclass
class BaselineModel:
    feature_dim: int
    weights: np.ndarray
    bias: float
    featurizer_version: str = FEATURIZER_VERSION
    ngram_lo: int = 3
    ngram_hi: int = 5
    boundary_sentences: int = 3

    def __post_init__(self):
        if self.feature_dim < 2 or self.feature_dim & (self.feature_dim - 1):
            raise ScorerError("feature_dim must be a power of two")
        if len(self.weights) != self.feature_dim:
            raise ScorerError("weights length must equal feature_dim")
        if not np.all(np.isfinite(self.weights)) or not math.isfinite(self.bias):
            raise ScorerError("model parameters must be finite")


def stable_hash64(data: str) -> int:
    """FNV-1a over UTF-8 bytes; the one hash every featurizer index uses."""
    h = _FNV_OFFSET
    for b in data.encode("utf-8"):
        h ^= b
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def boundary_punct_class(prefix: str) -> str:
    last = prefix[-1] if prefix else ""
    if last in _QUOTE_CHARS:
        return "quote"
    if last == ".":
        return "period"
    if last == "!":
        return "bang"
    if last == "?":
        return "question"
    return "other"


def _side_grams(text: str, ns: str, lo: int, hi: int, dim: int, out: dict[int, float]) -> None:
    lowered = text.lower()
    mask = dim - 1
    for n in range(lo, hi + 1):
        for i in range(len(lowered) - n + 1):
            idx = stable_hash64(f"{ns}|{lowered[i:i + n]}") & mask
            out[idx] = out.get(idx, 0.0) + 1.0


def featurize(prefix: str, postfix: str, cfg) -> dict[int, float]:
    """Hashed sparse features of the boundary between ``prefix`` and
    ``postfix``.

    ``cfg`` is anything carrying ``ngram_lo``, ``ngram_hi``,
    ``boundary_sentences`` and ``feature_dim`` (a TrainConfig or a
    BaselineModel). Only the ``boundary_sentences`` sentences adjacent to
    the boundary are featurized, namespaced by side, plus three scalar
    cues: the lengths of the two sentences touching the boundary and the
    punctuation class the prefix ends on.
    """
    k = cfg.boundary_sentences
    dim = cfg.feature_dim
    pre_sents = split_sentences(prefix).sentences[-k:]
    post_sents = split_sentences(postfix).sentences[:k]
    feats: dict[int, float] = {}
    _side_grams(" ".join(pre_sents), "pre", cfg.ngram_lo, cfg.ngram_hi, dim, feats)
    _side_grams(" ".join(post_sents), "post", cfg.ngram_lo, cfg.ngram_hi, dim, feats)

    mask = dim - 1
    last_pre = pre_sents[-1] if pre_sents else ""
    first_post = post_sents[0] if post_sents else ""
    scalars = {
        "s|len_pre_last": len(last_pre) / 100.0,
        "s|len_post_first": len(first_post) / 100.0,
        f"s|punct={boundary_punct_class(prefix.rstrip())}": 1.0,
    }
    for key, value in scalars.items():
        idx = stable_hash64(key) & mask
        feats[idx] = feats.get(idx, 0.0) + value
    return feats


def dot_features(weights: np.ndarray, feats: dict[int, float]) -> float:
    return float(sum(weights[i] * v for i, v in feats.items()))


def score_features(model: BaselineModel, feats: dict[int, float]) -> float:
    return sigmoid(dot_features(model.weights, feats) + model.bias)


def score(model: BaselineModel, req: ScoreRequest) -> float:
    """Branching probability of one request under the baseline model."""
    return score_features(model, featurize(req.prefix, req.postfix, model))


def classify(p: float, threshold: float = 0.5) -> str:
    """``branch`` iff p >= threshold (ties count as branch)."""
    return LABEL_BRANCH if p >= threshold else LABEL_NO_BRANCH


def logloss_and_grad(
    weights: np.ndarray,
    bias: float,
    data: Sequence[tuple[dict[int, float], int]],
    l2: float = 0.0,
) -> tuple[float, np.ndarray, float]:
    """Total log-loss with L2 penalty on the weights (not the bias), plus
    its dense analytic gradient. Used for training diagnostics and for
    the finite-difference gradient check."""
    grad_w = np.zeros_like(weights)
    grad_b = 0.0
    loss = 0.0
    for feats, y in data:
        p = sigmoid(dot_features(weights, feats) + bias)
        p_clipped = min(max(p, 1e-15), 1.0 - 1e-15)
        loss -= math.log(p_clipped) if y == 1 else math.log(1.0 - p_clipped)
        g = p - y
        for i, v in feats.items():
            grad_w[i] += g * v
        grad_b += g
    if l2 > 0.0:
        loss += 0.5 * l2 * float(np.dot(weights, weights))
        grad_w += l2 * weights
    return loss, grad_w, grad_b


def _accuracy(model: BaselineModel, data: Sequence[tuple[dict[int, float], int]]) -> float:
    if not data:
        return 0.0
    correct = sum(
        1 for feats, y in data if (score_features(model, feats) >= 0.5) == (y == 1)
    )
    return correct / len(data)


def _featurized(examples: Sequence[LabeledExample], cfg: TrainConfig):
    return [
        (featurize(e.prefix, e.postfix, cfg), 1 if e.label == LABEL_BRANCH else 0)
        for e in examples
    ]


def train_baseline(
    train: Sequence[LabeledExample],
    dev: Sequence[LabeledExample],
    cfg: TrainConfig,
    history_out: list[dict] | None = None,
) -> BaselineModel:
    """Fit the logistic baseline with seeded SGD on log-loss plus L2.

    Examples are visited in a fresh seeded shuffle each epoch. After
    every epoch the dev accuracy is measured and the checkpoint with the
    best dev accuracy is returned (earliest epoch wins ties); with an
    empty dev set the final epoch is returned.
    """
    import random as _random

    if not train:
        raise ScorerError("training set is empty")
    rng = _random.Random(cfg.seed)
    train_data = _featurized(train, cfg)
    dev_data = _featurized(dev, cfg)

    weights = np.zeros(cfg.feature_dim, dtype=np.float64)
    bias = 0.0
    best: tuple[float, np.ndarray, float] | None = None  # (dev_acc, weights, bias)

    order = list(range(len(train_data)))
    for epoch in range(1, cfg.epochs + 1):
        rng.shuffle(order)
        for i in order:
            feats, y = train_data[i]
            z = dot_features(weights, feats) + bias
            if not math.isfinite(z):
                raise ScorerError(f"non-finite activation at epoch {epoch}")
            g = sigmoid(z) - y
            lr = cfg.learning_rate
            for idx, v in feats.items():
                weights[idx] -= lr * (g * v + cfg.l2 * weights[idx])
            bias -= lr * g

        train_loss, _, _ = logloss_and_grad(weights, bias, train_data, cfg.l2)
        if not math.isfinite(train_loss):
            raise ScorerError(f"non-finite loss at epoch {epoch}")
        snapshot = BaselineModel(
            feature_dim=cfg.feature_dim,
            weights=weights,
            bias=bias,
            ngram_lo=cfg.ngram_lo,
            ngram_hi=cfg.ngram_hi,
            boundary_sentences=cfg.boundary_sentences,
        )
        dev_acc = _accuracy(snapshot, dev_data) if dev_data else None
        if history_out is not None:
            history_out.append(
                {"epoch": epoch, "train_loss": train_loss, "dev_accuracy": dev_acc}
            )
        if dev_data and (best is None or dev_acc > best[0]):
            best = (dev_acc, weights.copy(), bias)

    if best is not None:
        final_weights, final_bias = best[1], best[2]
    else:
        final_weights, final_bias = weights.copy(), bias
    return BaselineModel(
        feature_dim=cfg.feature_dim,
        weights=final_weights,
        bias=final_bias,
        ngram_lo=cfg.ngram_lo,
        ngram_hi=cfg.ngram_hi,
        boundary_sentences=cfg.boundary_sentences,
    )


def save_model(model: BaselineModel, path: Path | str) -> None:
    obj = {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "feature_dim": model.feature_dim,
        "bias": model.bias,
        "featurizer_version": model.featurizer_version,
        "ngram_lo": model.ngram_lo,
        "ngram_hi": model.ngram_hi,
        "boundary_sentences": model.boundary_sentences,
        "weights": [float(w) for w in model.weights],
    }
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh)
        fh.write("\n")


def load_model(path: Path | str) -> BaselineModel:
    with Path(path).open("r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if obj.get("format") != MODEL_FORMAT:
        raise ScorerError(f"not a baseline model file: {path}")
    if obj.get("format_version") != MODEL_FORMAT_VERSION:
        raise ScorerError(f"unsupported model format version {obj.get('format_version')!r}")
    return BaselineModel(
        feature_dim=int(obj["feature_dim"]),
        weights=np.asarray(obj["weights"], dtype=np.float64),
        bias=float(obj["bias"]),
        featurizer_version=str(obj["featurizer_version"]),
        ngram_lo=int(obj["ngram_lo"]),
        ngram_hi=int(obj["ngram_hi"]),
        boundary_sentences=int(obj["boundary_sentences"]),
    )


class Scorer(TypingProtocol):
    def score_batch(self, requests: Sequence[ScoreRequest]) -> list[float]: ...


@dataclass
class BaselineScorer:
    model: BaselineModel

    def score_batch(self, requests: Sequence[ScoreRequest]) -> list[float]:
        return [score(self.model, r) for r in requests]


@dataclass
class ConstantScorer:
    p: float = 0.5

    def score_batch(self, requests: Sequence[ScoreRequest]) -> list[float]:
        return [self.p for _ in requests]


@dataclass
class OracleScorer:
    """Reads the gold label by request id; for harness sanity checks."""

    gold: dict[str, str]

    @classmethod
    def for_examples(cls, examples: Sequence[LabeledExample]) -> "OracleScorer":
        return cls(gold={e.id: e.label for e in examples})

    def score_batch(self, requests: Sequence[ScoreRequest]) -> list[float]:
        out = []
        for r in requests:
            if r.id not in self.gold:
                raise ScorerError(f"oracle has no gold label for request {r.id!r}")
            out.append(1.0 if self.gold[r.id] == LABEL_BRANCH else 0.0)
        return out


# ---------------------------------------------------------------------------
# External scorer client.


class _LineTransport:
    """Byte-stream line transport with per-read timeouts."""

    def write_line(self, line: str) -> None:
        raise NotImplementedError

    def read_line(self, timeout: float) -> str | None:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError


class _FdLineReader:
    """Buffered line reading off a raw file descriptor via select()."""

    def __init__(self, fd: int):
        self.fd = fd
        self.buf = b""
        self.eof = False

    def read_line(self, timeout: float) -> str | None:
        while True:
            nl = self.buf.find(b"\n")
            if nl >= 0:
                line, self.buf = self.buf[:nl], self.buf[nl + 1 :]
                return line.decode("utf-8", errors="replace")
            if self.eof:
                if self.buf:
                    line, self.buf = self.buf, b""
                    return line.decode("utf-8", errors="replace")
                return None
            ready, _, _ = select.select([self.fd], [], [], timeout)
            if not ready:
                raise ScorerTimeoutError(f"no response within {timeout:.1f}s")
            chunk = os.read(self.fd, 65536)
            if not chunk:
                self.eof = True
            else:
                self.buf += chunk


class _SubprocessTransport(_LineTransport):
    def __init__(self, argv: list[str]):
        try:
            self.proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
        except OSError as e:
            raise ConnectionFailedError(f"cannot spawn scorer {argv!r}: {e}") from e
        self.reader = _FdLineReader(self.proc.stdout.fileno())

    def write_line(self, line: str) -> None:
        try:
            self.proc.stdin.write((line + "\n").encode("utf-8"))
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise ConnectionFailedError(f"scorer process closed its input: {e}") from e

    def read_line(self, timeout: float) -> str | None:
        return self.reader.read_line(timeout)

    def close(self) -> None:
        for stream in (self.proc.stdin, self.proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        try:
            self.proc.terminate()
            self.proc.wait(timeout=5)
        except Exception:
            self.proc.kill()


class _TcpTransport(_LineTransport):
    def __init__(self, host: str, port: int, timeout: float):
        try:
            self.sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as e:
            raise ConnectionFailedError(f"cannot connect to {host}:{port}: {e}") from e
        self.sock.setblocking(False)
        self.reader = _FdLineReader(self.sock.fileno())

    def write_line(self, line: str) -> None:
        data = (line + "\n").encode("utf-8")
        try:
            self.sock.setblocking(True)
            self.sock.sendall(data)
            self.sock.setblocking(False)
        except OSError as e:
            raise ConnectionFailedError(f"send failed: {e}") from e

    def read_line(self, timeout: float) -> str | None:
        return self.reader.read_line(timeout)

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


def _open_transport(endpoint: str, timeout: float) -> _LineTransport:
    if endpoint.startswith("cmd:"):
        argv = shlex.split(endpoint[len("cmd:"):])
        if not argv:
            raise ConnectionFailedError("empty command endpoint")
        return _SubprocessTransport(argv)
    if endpoint.startswith("tcp:"):
        rest = endpoint[len("tcp:"):]
        host, sep, port = rest.rpartition(":")
        if not sep or not port.isdigit():
            raise ConnectionFailedError(f"bad tcp endpoint {endpoint!r}, want tcp:host:port")
        return _TcpTransport(host, int(port), timeout)
    raise ConnectionFailedError(f"unknown endpoint scheme in {endpoint!r} (use cmd: or tcp:)")


@dataclass
class ExternalScorer:
    """Client for a chadpod-scorer/1 server.

    Requests are pipelined on a writer thread while responses stream
    back; responses may arrive in any order and are re-ordered to match
    the request order. Each error class is distinct: connection failures,
    handshake refusals, timeouts, malformed responses, out-of-range
    probabilities, and server-reported per-request errors.
    """

    endpoint: str
    timeout: float = 30.0
    _server_name: str | None = field(default=None, init=False, repr=False)

    def score_batch(self, requests: Sequence[ScoreRequest]) -> list[float]:
        ids = [r.id for r in requests]
        if len(set(ids)) != len(ids):
            raise ScorerError("request ids must be unique within a batch")
        if not requests:
            return []

        transport = _open_transport(self.endpoint, self.timeout)
        try:
            transport.write_line(protocol.hello_line())
            reply = transport.read_line(self.timeout)
            if reply is None:
                raise HandshakeError("scorer closed the stream during the handshake")
            try:
                obj = json.loads(reply)
            except json.JSONDecodeError as e:
                raise HandshakeError(f"handshake reply is not JSON: {reply!r}") from e
            if not (isinstance(obj, dict) and obj.get("ok") is True and isinstance(obj.get("name"), str)):
                raise HandshakeError(f"scorer refused the handshake: {reply.strip()}")
            self._server_name = obj["name"]

            write_error: list[Exception] = []

            def feed():
                try:
                    for r in requests:
                        transport.write_line(protocol.request_line(r.id, r.prefix, r.postfix))
                except Exception as e:  # surfaced after the read loop stalls
                    write_error.append(e)

            writer = threading.Thread(target=feed, daemon=True)
            writer.start()

            results: dict[str, float] = {}
            id_set = set(ids)
            pending = set(ids)
            while pending:
                try:
                    line = transport.read_line(self.timeout)
                except ScorerTimeoutError:
                    if write_error:
                        raise write_error[0]
                    raise ScorerTimeoutError(
                        f"timed out with {len(pending)} request(s) unanswered, "
                        f"e.g. {sorted(pending)[0]!r}"
                    ) from None
                if line is None:
                    raise ConnectionFailedError(
                        f"scorer closed the stream with {len(pending)} request(s) unanswered"
                    )
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as e:
                    raise MalformedResponseError(f"response is not JSON: {line!r}") from e
                if not isinstance(obj, dict):
                    raise MalformedResponseError(f"response must be an object: {line!r}")
                if "error" in obj:
                    rid = obj.get("id")
                    raise ServerReportedError(
                        f"scorer reported an error for {rid!r}: {obj['error']}"
                    )
                rid = obj.get("id")
                if not isinstance(rid, str) or rid not in id_set:
                    raise MalformedResponseError(f"response with unknown id: {line!r}")
                if rid in results:
                    raise MalformedResponseError(f"duplicate response for id {rid!r}")
                p = obj.get("p")
                if not isinstance(p, (int, float)) or isinstance(p, bool) or not math.isfinite(p):
                    raise MalformedResponseError(f"response for {rid!r} has no numeric p")
                if not 0.0 <= p <= 1.0:
                    raise ProbabilityRangeError(
                        f"probability {p} for request {rid!r} outside [0, 1]"
                    )
                results[rid] = float(p)
                pending.discard(rid)

            writer.join(timeout=self.timeout)
            return [results[i] for i in ids]
        finally:
            transport.close()


def external_score(endpoint: str, requests: Sequence[ScoreRequest], timeout: float = 30.0) -> list[float]:
    """One-shot convenience wrapper around :class:`ExternalScorer`."""
    return ExternalScorer(endpoint=endpoint, timeout=timeout).score_batch(requests)
