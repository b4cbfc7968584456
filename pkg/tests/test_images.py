from __future__ import annotations

import threading
from pathlib import Path

import httpx
import pytest

from roundtable import errors
from roundtable.images import (
    API_KEY_ENV,
    ENGINE_ID_ENV,
    FixtureImageProvider,
    ImageService,
    LiveImageProvider,
    normalized_keyword,
    sniff_extension,
)

from .conftest import StubProvider, jpeg_bytes, make_fixture_tree


@pytest.fixture
def fixture_dir(tmp_path):
    return make_fixture_tree(
        tmp_path / "fixtures",
        {
            ("en", "fried_chicken"): [jpeg_bytes("fried chicken #1"), jpeg_bytes("fried chicken #2")],
            ("ja", "naruto"): [jpeg_bytes("the ninja, not the fish cake")],
            ("en", "naruto"): [jpeg_bytes("en naruto")],
        },
    )


class CountingFixtureProvider(FixtureImageProvider):
    def __init__(self, fixture_dir):
        super().__init__(fixture_dir)
        self.search_calls = 0

    def search(self, keyword, locale):
        self.search_calls += 1
        return super().search(keyword, locale)


class TestFixtureProvider:
    def test_top_image_is_rank_one(self, fixture_dir, tmp_path):
        service = ImageService(FixtureImageProvider(fixture_dir), tmp_path / "cache")
        ref = service.search_top_image("Fried Chicken", "en")
        assert ref.source_url.endswith("/1.jpg")
        assert Path(ref.local_path).read_bytes() == jpeg_bytes("fried chicken #1")
        assert ref.provider == "fixture"
        assert ref.query == "Fried Chicken"

    def test_keyword_normalization(self):
        assert normalized_keyword("Fried  Chicken") == "fried_chicken"

    def test_fixture_determinism_across_services(self, fixture_dir, tmp_path):
        a = ImageService(FixtureImageProvider(fixture_dir), tmp_path / "cache_a")
        b = ImageService(FixtureImageProvider(fixture_dir), tmp_path / "cache_b")
        ref_a = a.search_top_image("naruto", "ja")
        ref_b = b.search_top_image("naruto", "ja")
        assert ref_a.source_url == ref_b.source_url
        assert Path(ref_a.local_path).read_bytes() == Path(ref_b.local_path).read_bytes()

    def test_cache_hit_skips_provider(self, fixture_dir, tmp_path):
        provider = CountingFixtureProvider(fixture_dir)
        service = ImageService(provider, tmp_path / "cache")
        first = service.search_top_image("fried chicken", "en")
        second = service.search_top_image("FRIED CHICKEN", "en")
        assert provider.search_calls == 1
        assert second is first

    def test_cache_transparency(self, fixture_dir, tmp_path):
        cached = ImageService(FixtureImageProvider(fixture_dir), tmp_path / "c1", memoize=True)
        uncached = ImageService(FixtureImageProvider(fixture_dir), tmp_path / "c2", memoize=False)
        for _ in range(2):
            assert (
                cached.search_top_image("fried chicken", "en").source_url
                == uncached.search_top_image("fried chicken", "en").source_url
            )

    def test_no_results(self, fixture_dir, tmp_path):
        service = ImageService(FixtureImageProvider(fixture_dir), tmp_path / "cache")
        with pytest.raises(errors.NoResults):
            service.search_top_image("quantum chromodynamics", "en")

    def test_empty_keyword_rejected(self, fixture_dir, tmp_path):
        service = ImageService(FixtureImageProvider(fixture_dir), tmp_path / "cache")
        with pytest.raises(errors.ValidationError):
            service.search_top_image("  ", "en")

    def test_locale_separates_fixtures(self, fixture_dir, tmp_path):
        service = ImageService(FixtureImageProvider(fixture_dir), tmp_path / "cache")
        ja_ref = service.search_top_image("naruto", "ja")
        en_ref = service.search_top_image("naruto", "en")
        assert Path(ja_ref.local_path).read_bytes() != Path(en_ref.local_path).read_bytes()

    def test_content_addressed_cache_deduplicates(self, tmp_path):
        provider = StubProvider()
        service = ImageService(provider, tmp_path / "cache")
        # Same bytes under two keywords: one cached file, two refs.
        provider.fetch = lambda url: jpeg_bytes("same")
        ref_a = service.search_top_image("alpha", "en")
        ref_b = service.search_top_image("beta", "en")
        assert ref_a.local_path == ref_b.local_path
        cached = [p for p in (tmp_path / "cache").iterdir() if not p.name.endswith(".part")]
        assert len(cached) == 1

    def test_concurrent_lookups_coalesce(self, tmp_path):
        provider = StubProvider()
        slow_gate = threading.Event()
        original_search = provider.search

        def slow_search(keyword, locale):
            slow_gate.wait(0.5)
            return original_search(keyword, locale)

        provider.search = slow_search
        service = ImageService(provider, tmp_path / "cache")
        results = []
        threads = [
            threading.Thread(target=lambda: results.append(service.search_top_image("x", "en")))
            for _ in range(4)
        ]
        for thread in threads:
            thread.start()
        slow_gate.set()
        for thread in threads:
            thread.join()
        assert provider.search_calls == 1
        assert len({id(ref) for ref in results}) == 1


class TestManualImages:
    def test_manual_bytes(self, tmp_path):
        service = ImageService(StubProvider(), tmp_path / "cache")
        ref = service.attach_manual_image("fried chicken", jpeg_bytes("hand-picked"))
        assert ref.provider == "manual"
        assert Path(ref.local_path).read_bytes() == jpeg_bytes("hand-picked")

    def test_empty_payload(self, tmp_path):
        service = ImageService(StubProvider(), tmp_path / "cache")
        with pytest.raises(errors.EmptyPayload):
            service.attach_manual_image("x", b"")

    def test_unsupported_format(self, tmp_path):
        service = ImageService(StubProvider(), tmp_path / "cache")
        with pytest.raises(errors.UnsupportedFormat):
            service.attach_manual_image("x", b"definitely not an image")

    def test_sniffer_knows_common_formats(self):
        assert sniff_extension(jpeg_bytes("x")) == ".jpg"
        assert sniff_extension(b"\x89PNG\r\n\x1a\n rest") == ".png"
        assert sniff_extension(b"GIF89a rest") == ".gif"
        assert sniff_extension(b"RIFF1234WEBP rest") == ".webp"


def _mock_live_provider(handler, **kwargs):
    transport = httpx.MockTransport(handler)
    return LiveImageProvider(
        api_key="test-key-SECRET", engine_id="test-cx", transport=transport, **kwargs
    )


class TestLiveProvider:
    def test_search_and_fetch_top_result(self, tmp_path):
        def handler(request: httpx.Request) -> httpx.Response:
            if request.url.host == "www.googleapis.com":
                assert request.url.params["searchType"] == "image"
                assert request.url.params["q"] == "fried chicken"
                assert request.url.params["lr"] == "lang_en"
                return httpx.Response(
                    200,
                    json={"items": [{"link": "https://img.example/top.jpg"},
                                    {"link": "https://img.example/second.jpg"}]},
                )
            return httpx.Response(200, content=jpeg_bytes("live top"))

        service = ImageService(_mock_live_provider(handler), tmp_path / "cache")
        ref = service.search_top_image("fried chicken", "en")
        assert ref.source_url == "https://img.example/top.jpg"
        assert ref.provider == "live"
        assert Path(ref.local_path).read_bytes() == jpeg_bytes("live top")

    def test_quota_rejection(self, tmp_path):
        provider = _mock_live_provider(lambda request: httpx.Response(429, json={}))
        with pytest.raises(errors.ProviderRejected):
            provider.search("x", "en")

    def test_timeout(self, tmp_path):
        def handler(request):
            raise httpx.ConnectTimeout("slow")

        provider = _mock_live_provider(handler)
        with pytest.raises(errors.ProviderTimeout):
            provider.search("x", "en")

    def test_empty_items_is_no_results(self, tmp_path):
        provider = _mock_live_provider(lambda request: httpx.Response(200, json={"items": []}))
        with pytest.raises(errors.NoResults):
            provider.search("x", "en")

    def test_missing_credentials(self, monkeypatch):
        monkeypatch.delenv(API_KEY_ENV, raising=False)
        monkeypatch.delenv(ENGINE_ID_ENV, raising=False)
        with pytest.raises(errors.MissingCredentials):
            LiveImageProvider.from_env()

    def test_credentials_never_leak(self, tmp_path, caplog):
        def handler(request: httpx.Request) -> httpx.Response:
            if request.url.host == "www.googleapis.com":
                return httpx.Response(
                    200, json={"items": [{"link": "https://img.example/a.jpg"}]}
                )
            return httpx.Response(200, content=jpeg_bytes("x"))

        service = ImageService(_mock_live_provider(handler), tmp_path / "cache")
        with caplog.at_level("DEBUG"):
            ref = service.search_top_image("fried chicken", "en")
        secret = "test-key-SECRET"
        assert secret not in ref.source_url
        assert secret not in ref.local_path
        assert secret not in ref.query
        for record in caplog.records:
            assert secret not in record.getMessage()

    def test_rejection_message_hides_key(self):
        provider = _mock_live_provider(lambda request: httpx.Response(403, json={}))
        with pytest.raises(errors.ProviderRejected) as exc_info:
            provider.search("x", "en")
        assert "test-key-SECRET" not in str(exc_info.value)
