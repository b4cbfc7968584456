"""Top-image retrieval for topic keywords, through a pluggable provider.

The live provider speaks the public custom-search HTTP contract (key + cx
query params, searchType=image, locale mapped to language restriction). The
fixture provider serves ranked files from a directory tree and exists so that
tests and offline care-facility deployments are deterministic and need no
network. Downloaded bytes are content-addressed in the cache; repeated
(keyword, locale) lookups are memoized and never hit the provider twice.
"""

from __future__ import annotations

import hashlib
import logging
import os
import tempfile
import threading
from pathlib import Path

import httpx

from .clock import Clock, WallClock
from .errors import (
    EmptyPayload,
    MissingCredentials,
    NoResults,
    ProviderRejected,
    ProviderTimeout,
    UnsupportedFormat,
    ValidationError,
)
from .grammar import normalize
from .model import ImageRef

logger = logging.getLogger(__name__)

API_KEY_ENV = "ROUNDTABLE_IMAGE_API_KEY"
ENGINE_ID_ENV = "ROUNDTABLE_IMAGE_CX"
DEFAULT_ENDPOINT = "https://www.googleapis.com/customsearch/v1"


class _SecretRedactor(logging.Filter):
    """Scrubs registered credentials from log records.

    httpx logs full request URLs at INFO, which would echo the query-string
    key; this filter sits on the http client loggers so no credential ever
    reaches a handler.
    """

    def __init__(self):
        super().__init__()
        self.secrets: set[str] = set()

    def filter(self, record: logging.LogRecord) -> bool:
        if self.secrets:
            message = record.getMessage()
            redacted = message
            for secret in self.secrets:
                redacted = redacted.replace(secret, "[redacted]")
            if redacted != message:
                record.msg = redacted
                record.args = ()
        return True


_redactor = _SecretRedactor()
for _name in ("httpx", "httpcore"):
    logging.getLogger(_name).addFilter(_redactor)

_MAGIC = (
    (b"\xff\xd8\xff", ".jpg"),
    (b"\x89PNG\r\n\x1a\n", ".png"),
    (b"GIF87a", ".gif"),
    (b"GIF89a", ".gif"),
)


def sniff_extension(payload: bytes) -> str:
    """Extension for known raster formats; raises on empty or unknown bytes."""
    if not payload:
        raise EmptyPayload("image payload is empty")
    for magic, ext in _MAGIC:
        if payload.startswith(magic):
            return ext
    if payload[:4] == b"RIFF" and payload[8:12] == b"WEBP":
        return ".webp"
    raise UnsupportedFormat("payload is not a recognized image format")


def normalized_keyword(keyword: str) -> str:
    return normalize(keyword).replace(" ", "_")


class FixtureImageProvider:
    """Serves <fixture_dir>/<locale>/<normalized_keyword>/, ranked by filename."""

    def __init__(self, fixture_dir: str | Path):
        self.fixture_dir = Path(fixture_dir)

    def search(self, keyword: str, locale: str) -> list[str]:
        folder = self.fixture_dir / locale / normalized_keyword(keyword)
        if not folder.is_dir():
            raise NoResults(f"no fixture for {keyword!r} ({locale})")
        names = sorted(p.name for p in folder.iterdir() if p.is_file())
        if not names:
            raise NoResults(f"empty fixture for {keyword!r} ({locale})")
        return [f"fixture://{locale}/{normalized_keyword(keyword)}/{name}" for name in names]

    def fetch(self, source_url: str) -> bytes:
        relative = source_url.removeprefix("fixture://")
        path = self.fixture_dir / Path(relative)
        if not path.is_file():
            raise NoResults(f"fixture vanished: {source_url}")
        return path.read_bytes()


# Language/region restriction per locale, as the provider's API defines them.
_LOCALE_PARAMS = {
    "en": {"lr": "lang_en", "gl": "us"},
    "ja": {"lr": "lang_ja", "gl": "jp"},
}


class LiveImageProvider:
    """HTTP image-search client. Credentials come from the environment only."""

    def __init__(
        self,
        api_key: str,
        engine_id: str,
        endpoint: str = DEFAULT_ENDPOINT,
        timeout_s: float = 10.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self._api_key = api_key
        self._engine_id = engine_id
        _redactor.secrets.update({api_key, engine_id})
        self.endpoint = endpoint
        self._client = httpx.Client(timeout=timeout_s, transport=transport)

    @classmethod
    def from_env(cls, **kwargs) -> "LiveImageProvider":
        api_key = os.environ.get(API_KEY_ENV, "")
        engine_id = os.environ.get(ENGINE_ID_ENV, "")
        if not api_key or not engine_id:
            raise MissingCredentials(
                f"live provider needs {API_KEY_ENV} and {ENGINE_ID_ENV} in the environment"
            )
        return cls(api_key=api_key, engine_id=engine_id, **kwargs)

    def search(self, keyword: str, locale: str) -> list[str]:
        params = {
            "key": self._api_key,
            "cx": self._engine_id,
            "q": keyword,
            "searchType": "image",
            "num": 5,
        }
        params.update(_LOCALE_PARAMS.get(locale, {}))
        try:
            response = self._client.get(self.endpoint, params=params)
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(f"image search timed out for {keyword!r}") from exc
        if response.status_code < 200 or response.status_code >= 300:
            # Never echo the request URL here: it carries the key.
            raise ProviderRejected(f"image search returned HTTP {response.status_code}")
        items = response.json().get("items") or []
        links = [item["link"] for item in items if item.get("link")]
        if not links:
            raise NoResults(f"no image results for {keyword!r}")
        return links

    def fetch(self, source_url: str) -> bytes:
        try:
            response = self._client.get(source_url)
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(f"image download timed out: {source_url}") from exc
        if response.status_code < 200 or response.status_code >= 300:
            raise ProviderRejected(f"image download returned HTTP {response.status_code}")
        return response.content


class ImageService:
    """Caches top images and coalesces concurrent lookups per (keyword, locale)."""

    def __init__(
        self,
        provider,
        cache_dir: str | Path,
        clock: Clock | None = None,
        memoize: bool = True,
    ):
        self.provider = provider
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.clock = clock or WallClock()
        self.memoize = memoize
        self._memo: dict[tuple[str, str], ImageRef] = {}
        self._locks: dict[tuple[str, str], threading.Lock] = {}
        self._master = threading.Lock()

    def _key_lock(self, key: tuple[str, str]) -> threading.Lock:
        with self._master:
            lock = self._locks.get(key)
            if lock is None:
                lock = self._locks.setdefault(key, threading.Lock())
            return lock

    def _store(self, payload: bytes) -> str:
        ext = sniff_extension(payload)
        digest = hashlib.sha256(payload).hexdigest()
        final = self.cache_dir / f"{digest}{ext}"
        if not final.exists():
            fd, tmp = tempfile.mkstemp(dir=self.cache_dir, suffix=".part")
            with os.fdopen(fd, "wb") as fh:
                fh.write(payload)
            os.replace(tmp, final)
        return str(final)

    def search_top_image(self, keyword: str, locale: str) -> ImageRef:
        """Top-ranked image for the keyword, from cache when already fetched."""
        if not keyword.strip():
            raise ValidationError("keyword must be non-empty")
        key = (normalized_keyword(keyword), locale)
        if self.memoize and key in self._memo:
            return self._memo[key]
        with self._key_lock(key):
            if self.memoize and key in self._memo:
                return self._memo[key]
            ranked = self.provider.search(keyword, locale)
            top_url = ranked[0]
            payload = self.provider.fetch(top_url)
            local_path = self._store(payload)
            ref = ImageRef(
                source_url=top_url,
                local_path=local_path,
                query=keyword,
                provider="fixture" if isinstance(self.provider, FixtureImageProvider) else "live",
                fetched_at=self.clock.now(),
            )
            if self.memoize:
                self._memo[key] = ref
            logger.info("image attached for %r (%s) from %s", keyword, locale, ref.provider)
            return ref

    def attach_manual_image(self, query: str, payload: bytes | str) -> ImageRef:
        """Facilitator fallback: store supplied bytes (or download a URL) verbatim."""
        if isinstance(payload, str):
            source_url = payload
            data = self._download_manual(payload)
        else:
            source_url = "manual://upload"
            data = payload
        if not data:
            raise EmptyPayload("manual image payload is empty")
        local_path = self._store(data)
        return ImageRef(
            source_url=source_url,
            local_path=local_path,
            query=query,
            provider="manual",
            fetched_at=self.clock.now(),
        )

    def _download_manual(self, url: str) -> bytes:
        try:
            response = httpx.get(url, timeout=10.0)
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(f"manual image download timed out: {url}") from exc
        if response.status_code < 200 or response.status_code >= 300:
            raise ProviderRejected(f"manual image download returned HTTP {response.status_code}")
        return response.content
