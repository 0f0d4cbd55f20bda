"""Next-token log-probabilities: distributions, label matching, providers and the on-disk cache."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import re
import socket
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

logger = logging.getLogger(__name__)

DEFAULT_TOP_K = 20
MASS_TOLERANCE = 1e-6


class ProviderError(RuntimeError):
    pass


class TransportError(ProviderError):
    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (after {attempts} attempt{'s' if attempts != 1 else ''})")
        self.attempts = attempts


class CapabilityError(ProviderError):
    """The endpoint answered but does not return next-token log-probabilities."""


class HttpStatusError(ProviderError):
    def __init__(self, status: int, body: str = "", attempts: int = 1):
        super().__init__(f"HTTP {status}: {body[:200]}")
        self.status = status
        self.attempts = attempts


class AliasConfigError(ValueError):
    pass


def prompt_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class TokenDistribution:
    entries: tuple[tuple[str, float], ...]
    model_id: str
    prompt_hash: str

    def __post_init__(self) -> None:
        tokens = [t for t, _ in self.entries]
        if len(set(tokens)) != len(tokens):
            raise ValueError("token entries must be distinct")
        for t, lp in self.entries:
            if not (lp <= 0.0) or math.isnan(lp):
                raise ValueError(f"logprob for {t!r} must be <= 0, got {lp}")
        total = math.fsum(math.exp(lp) for _, lp in self.entries)
        if total > 1.0 + MASS_TOLERANCE:
            raise ValueError(f"probabilities sum to {total} > 1")

    def prob(self, token: str) -> float:
        for t, lp in self.entries:
            if t == token:
                return math.exp(lp)
        return 0.0

    def to_dict(self) -> dict[str, Any]:
        return {"model_id": self.model_id, "prompt_hash": self.prompt_hash,
                "entries": [[t, lp] for t, lp in self.entries]}

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "TokenDistribution":
        return cls(tuple((str(t), float(lp)) for t, lp in raw["entries"]), raw["model_id"], raw["prompt_hash"])


@dataclass(frozen=True)
class LabelMass:
    per_label: Mapping[str, float]
    total_mass: float

    @classmethod
    def from_per_label(cls, per_label: Mapping[str, float]) -> "LabelMass":
        return cls(dict(per_label), math.fsum(per_label.values()))


@dataclass(frozen=True)
class AliasTable:
    """Token surface forms that count toward each decision label."""

    aliases: Mapping[str, frozenset[str]]

    def __post_init__(self) -> None:
        owner: dict[str, str] = {}
        for label, toks in self.aliases.items():
            for t in toks:
                if t in owner and owner[t] != label:
                    raise AliasConfigError(f"token {t!r} is aliased to both {owner[t]!r} and {label!r}")
                owner[t] = label

    def for_label(self, label: str) -> frozenset[str]:
        return self.aliases[label]

    @property
    def total(self) -> int:
        return sum(len(v) for v in self.aliases.values())


def surface_forms(word: str) -> set[str]:
    """The word as given and capitalized, each with and without a leading space."""
    forms = {word, word[:1].upper() + word[1:]}
    return forms | {" " + f for f in forms}


# Multi-word labels usually tokenize to their first word; these prefixes are added to the
# default alias sets. Keys are the labels they extend.
LABEL_PREFIXES: dict[str, tuple[str, ...]] = {
    "AcceptOffer": ("Accept",),
    "RejectOffer": ("Reject",),
    "DealWithJohn": ("Deal",),
}


def default_alias_table(labels: Sequence[str], extra: Mapping[str, Iterable[str]] | None = None) -> AliasTable:
    table: dict[str, set[str]] = {}
    for label in labels:
        forms = surface_forms(label)
        for prefix in LABEL_PREFIXES.get(label, ()):
            forms |= surface_forms(prefix)
        if extra and label in extra:
            forms |= set(extra[label])
        table[label] = forms
    return AliasTable({k: frozenset(v) for k, v in table.items()})


def match_decision_tokens(dist: TokenDistribution, labels: Sequence[str], aliases: AliasTable) -> LabelMass:
    """Sum exp(logprob) over each label's aliases present in the distribution."""
    missing = [l for l in labels if l not in aliases.aliases]
    if missing:
        raise AliasConfigError(f"no aliases for label(s) {missing}")
    # revalidate disjointness over exactly these labels
    AliasTable({l: aliases.aliases[l] for l in labels})
    probs = {t: math.exp(lp) for t, lp in dist.entries}
    per_label = {l: math.fsum(probs[t] for t in sorted(aliases.for_label(l)) if t in probs) for l in labels}
    return LabelMass.from_per_label(per_label)


def truncation_warning(dist: TokenDistribution, k: int, masses: LabelMass) -> bool:
    """True when top-k truncation could hide mass comparable to a matched label's mass."""
    if len(dist.entries) < k or not dist.entries:
        return False
    kth = min(math.exp(lp) for _, lp in dist.entries)
    smallest = min(masses.per_label.values())
    return kth > smallest


# -- providers -------------------------------------------------------------

class Provider:
    """Backend returning raw top-k (token, logprob) pairs for the next position."""

    def top_logprobs(self, model_id: str, prompt: str, k: int) -> list[tuple[str, float]]:
        raise NotImplementedError

    def probe(self, model_id: str) -> None:
        """Raise CapabilityError if the backend cannot return logprobs for this model."""


@dataclass
class HttpProvider(Provider):
    """OpenAI-style completions endpoint asked for exactly one new token and its top-k logprobs."""

    url: str
    credential_env: str | None = None
    timeout: float = 60.0
    max_attempts: int = 4
    backoff: float = 1.0
    opener: Callable[..., Any] = urllib.request.urlopen

    def _request(self, payload: dict[str, Any]) -> dict[str, Any]:
        headers = {"Content-Type": "application/json"}
        if self.credential_env:
            token = os.environ.get(self.credential_env)
            if token:
                headers["Authorization"] = f"Bearer {token}"
        data = json.dumps(payload).encode("utf-8")
        last: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            req = urllib.request.Request(self.url, data=data, headers=headers, method="POST")
            try:
                with self.opener(req, timeout=self.timeout) as resp:
                    return json.loads(resp.read().decode("utf-8"))
            except urllib.error.HTTPError as exc:
                body = exc.read().decode("utf-8", "replace") if exc.fp else ""
                if exc.code in (408, 429) or exc.code >= 500:
                    last = HttpStatusError(exc.code, body, attempt)
                else:
                    raise HttpStatusError(exc.code, body, attempt) from exc
            except (urllib.error.URLError, socket.timeout, TimeoutError, ConnectionError) as exc:
                last = exc
            if attempt < self.max_attempts and self.backoff > 0:
                time.sleep(self.backoff * 2 ** (attempt - 1))
        if isinstance(last, HttpStatusError):
            last.attempts = self.max_attempts
            raise last
        raise TransportError(f"request to {self.url} failed: {last}", self.max_attempts)

    def top_logprobs(self, model_id: str, prompt: str, k: int) -> list[tuple[str, float]]:
        payload = {
            "model": model_id,
            "prompt": prompt,
            "max_new_tokens": 1,
            "max_tokens": 1,
            "logprobs": k,
            "temperature": 0,
        }
        return parse_logprob_response(self._request(payload))[:k]

    def probe(self, model_id: str) -> None:
        self.top_logprobs(model_id, "Hello", 1)


def parse_logprob_response(body: Mapping[str, Any]) -> list[tuple[str, float]]:
    """Extract first-position top-k pairs from either accepted response shape.

    Shapes: OpenAI completions (``choices[0].logprobs.top_logprobs[0]`` as a token->logprob
    map) or a flat ``top_logprobs`` list of ``[token, logprob]`` / ``{"token", "logprob"}``.
    """
    top: Any = None
    try:
        top = body["choices"][0]["logprobs"]["top_logprobs"][0]
    except (KeyError, IndexError, TypeError):
        top = body.get("top_logprobs") if isinstance(body, Mapping) else None
        if isinstance(top, list) and top and isinstance(top[0], list) and top[0] and isinstance(top[0][0], (list, dict)):
            top = top[0]
    if not top:
        raise CapabilityError("response carries no next-token logprobs")
    if isinstance(top, Mapping):
        pairs = [(str(t), float(lp)) for t, lp in top.items()]
    else:
        pairs = []
        for item in top:
            if isinstance(item, Mapping):
                pairs.append((str(item["token"]), float(item["logprob"])))
            else:
                pairs.append((str(item[0]), float(item[1])))
    pairs.sort(key=lambda e: (-e[1], e[0]))
    return pairs


# -- mock backend ----------------------------------------------------------

AFFIRMATIVE_WORDS = frozenset({"accept", "yes", "AcceptOffer", "cooperate", "A"})
FILLER_TOKENS = ("\n", " I", " The")
_OPTIONS_RE = re.compile(r"Possible decisions: (.+?)\.\n")
_QUOTED_RE = re.compile(r'"([^"]+)"')


def _unit_hash(*parts: str) -> float:
    digest = hashlib.sha256("\x00".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2.0**64


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass(frozen=True)
class MockBehavior:
    """Parameterized stand-in for a model.

    kinds:
      fixed      -- ``tokens`` gives the distribution verbatim
      logistic   -- affirmative probability = sigmoid(intercept + slope * cue), where cue is the
                    last ``"<cue>": number`` in the prompt
      table      -- affirmative probability looked up by prompt hash in ``table``
      noise      -- affirmative probability uniform in [0, 1], derived from a hash of the prompt
      no_logprobs -- endpoint without logprob support
    """

    kind: str
    mass: float = 0.95
    tokens: Mapping[str, float] = field(default_factory=dict)
    cue: str = ""
    slope: float = 1.0
    intercept: float = 0.0
    table: Mapping[str, float] = field(default_factory=dict)
    affirmative: frozenset[str] = AFFIRMATIVE_WORDS

    KINDS = ("fixed", "logistic", "table", "noise", "no_logprobs")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown mock kind {self.kind!r}")
        if not 0.0 <= self.mass <= 1.0:
            raise ValueError("mock mass must be in [0, 1]")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "MockBehavior":
        raw = dict(raw)
        if "affirmative" in raw:
            raw["affirmative"] = frozenset(raw["affirmative"])
        return cls(**raw)

    def affirmative_prob(self, model_id: str, prompt: str) -> float | None:
        if self.kind == "logistic":
            matches = re.findall(r'"%s": (-?[0-9.eE+-]+)' % re.escape(self.cue), prompt)
            if not matches:
                return None
            return _sigmoid(self.intercept + self.slope * float(matches[-1]))
        if self.kind == "table":
            value = self.table.get(prompt_hash(prompt))
            return None if value is None else float(value)
        if self.kind == "noise":
            return _unit_hash("noise", model_id, prompt)
        return None


BUILTIN_MOCKS: dict[str, MockBehavior] = {
    "always-accept": MockBehavior("fixed", tokens={"accept": 0.9, "reject": 0.05, "\n": 0.03}),
}


class MockProvider(Provider):
    """Deterministic provider: output is a pure function of (model_id, prompt text)."""

    def __init__(self, behaviors: Mapping[str, MockBehavior] | None = None):
        self.behaviors = dict(BUILTIN_MOCKS)
        self.behaviors.update(behaviors or {})

    def _behavior(self, model_id: str) -> MockBehavior:
        try:
            return self.behaviors[model_id]
        except KeyError:
            raise ProviderError(f"no mock behaviour configured for model {model_id!r}") from None

    def probe(self, model_id: str) -> None:
        if self._behavior(model_id).kind == "no_logprobs":
            raise CapabilityError(f"mock model {model_id!r} does not return logprobs")

    def top_logprobs(self, model_id: str, prompt: str, k: int) -> list[tuple[str, float]]:
        beh = self._behavior(model_id)
        if beh.kind == "no_logprobs":
            raise CapabilityError(f"mock model {model_id!r} does not return logprobs")
        if beh.kind == "fixed":
            probs = dict(beh.tokens)
        else:
            probs = self._label_probs(beh, model_id, prompt)
        entries = [(t, math.log(p)) for t, p in probs.items() if p > 0.0]
        entries.sort(key=lambda e: (-e[1], e[0]))
        return entries[:k]

    def _label_probs(self, beh: MockBehavior, model_id: str, prompt: str) -> dict[str, float]:
        found = _OPTIONS_RE.findall(prompt)
        labels = _QUOTED_RE.findall(found[-1]) if found else []
        p = beh.affirmative_prob(model_id, prompt)
        affirmative = [l for l in labels if l in beh.affirmative]
        probs: dict[str, float] = {}
        mass = beh.mass
        if p is None or len(affirmative) != 1:
            mass = 0.0
        else:
            others = [l for l in labels if l != affirmative[0]]
            probs[affirmative[0]] = mass * p
            for l in others:
                probs[l] = mass * (1.0 - p) / len(others)
        rest = 1.0 - mass
        for t in FILLER_TOKENS:
            probs[t] = rest / len(FILLER_TOKENS)
        return probs


# -- cache and client ------------------------------------------------------

class DiskCache:
    """Content-addressed store of TokenDistribution records, one JSON file per key."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    @staticmethod
    def key(model_id: str, phash: str, k: int) -> str:
        return hashlib.sha256(json.dumps([model_id, phash, k]).encode("utf-8")).hexdigest()

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> TokenDistribution | None:
        path = self._path(key)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None
        except json.JSONDecodeError:
            logger.warning("ignoring corrupt cache entry %s", path)
            return None
        return TokenDistribution.from_dict(raw)

    def put(self, key: str, dist: TokenDistribution) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(f"{path.name}.{os.getpid()}.{threading.get_ident()}.tmp")
        tmp.write_text(json.dumps(dist.to_dict(), sort_keys=True), encoding="utf-8")
        os.replace(tmp, path)


class LogprobClient:
    def __init__(self, provider: Provider, cache: DiskCache | None = None):
        self.provider = provider
        self.cache = cache
        self.network_calls = 0
        self._lock = threading.Lock()

    def fetch_next_token_logprobs(self, model_id: str, prompt_text: Any, k: int = DEFAULT_TOP_K) -> TokenDistribution:
        """Top-k next-token distribution; ``prompt_text`` may be a string or a RenderedPrompt."""
        prompt_text = getattr(prompt_text, "text", prompt_text)
        phash = prompt_hash(prompt_text)
        key = DiskCache.key(model_id, phash, k)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                return hit
        with self._lock:
            self.network_calls += 1
        entries = self.provider.top_logprobs(model_id, prompt_text, k)
        dist = TokenDistribution(tuple(entries[:k]), model_id, phash)
        if self.cache is not None:
            self.cache.put(key, dist)
        return dist

    def fetch_many(self, jobs: Mapping[str, tuple[str, str]], k: int = DEFAULT_TOP_K,
                   concurrency: int = 1) -> dict[str, TokenDistribution | Exception]:
        """Fetch ``{request_id: (model_id, prompt_text)}``; failures come back as exceptions."""
        if concurrency < 1:
            raise ValueError("concurrency must be >= 1")

        def one(item):
            rid, (model_id, text) = item
            try:
                return rid, self.fetch_next_token_logprobs(model_id, text, k)
            except ProviderError as exc:
                return rid, exc

        items = sorted(jobs.items())
        if concurrency == 1:
            return dict(map(one, items))
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            return dict(pool.map(one, items))


def fetch_next_token_logprobs(client: LogprobClient, model_id: str, prompt_text: str,
                              k: int = DEFAULT_TOP_K) -> TokenDistribution:
    return client.fetch_next_token_logprobs(model_id, prompt_text, k)
