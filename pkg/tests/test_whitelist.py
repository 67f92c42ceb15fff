from __future__ import annotations

import json
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tlsgate.errors import (
    DomainNotFoundError,
    DuplicateDomainError,
    HeaderParseError,
    NormalizationError,
    StoreFormatError,
)
from tlsgate.policy import PolicyLevel
from tlsgate.whitelist import (
    DomainEntry,
    ErrorHandling,
    HeaderDirective,
    SubscriptionSource,
    WhitelistStore,
    canonical_json,
    load_store,
    normalize_domain,
    parse_subscription_header,
    save_store,
    store_from_document,
)

T0 = 1_000_000.0

# Hand-built cases composing the strip rules: whitespace, scheme, port,
# path/query/fragment, trailing dot, case folding.
NORMALIZE_CASES = [
    ("example.com", "example.com"),
    ("Example.COM", "example.com"),
    ("  example.com  ", "example.com"),
    ("https://mail.example.com:443/inbox", "mail.example.com"),
    ("http://example.com", "example.com"),
    ("example.com:8443", "example.com"),
    ("example.com/path/to/page", "example.com"),
    ("example.com?q=1", "example.com"),
    ("example.com#frag", "example.com"),
    ("example.com.", "example.com"),
    ("WWW.Example.Com.", "www.example.com"),
    ("https://a.b.c.example.com/x?y#z", "a.b.c.example.com"),
    ("ftp://files.example.org:21/pub", "files.example.org"),
    ("bank-1.example", "bank-1.example"),
    ("xn--bcher-kva.example", "xn--bcher-kva.example"),
    ("EXAMPLE.CO.UK", "example.co.uk"),
    ("  HTTPS://Secure.Example.NET:443/  ", "secure.example.net"),
    ("mail.example.com/etc", "mail.example.com"),
    ("0.0.0.0:9", "0.0.0.0"),
    ("a.b", "a.b"),
]

NORMALIZE_REJECTS = [
    "localhost",
    "",
    "   ",
    "https://",
    "exa mple.com",
    "example..com",
    ".example.com",
    "exam_ple.com",
    "bücher.example",
    "com",
]


class TestNormalizeDomain:
    @pytest.mark.parametrize("raw,expected", NORMALIZE_CASES)
    def test_table(self, raw, expected):
        assert normalize_domain(raw) == expected

    @pytest.mark.parametrize("raw", NORMALIZE_REJECTS)
    def test_rejects(self, raw):
        with pytest.raises(NormalizationError):
            normalize_domain(raw)

    def test_idempotent_on_normalized(self):
        for _, expected in NORMALIZE_CASES:
            assert normalize_domain(expected) == expected


# Ten hand-written header cases, modeled on the HSTS max-age grammar.
HEADER_CASES = [
    ("", HeaderDirective(present=True)),
    ("   ", HeaderDirective(present=True)),
    ("max-age=86400", HeaderDirective(present=True, max_age_seconds=86400)),
    ("MAX-AGE=60", HeaderDirective(present=True, max_age_seconds=60)),
    ("max-age = 30", HeaderDirective(present=True, max_age_seconds=30)),
    ('max-age="120"', HeaderDirective(present=True, max_age_seconds=120)),
    ("max-age=0", HeaderDirective(present=True, max_age_seconds=0)),
    ("includeSubDomains", HeaderDirective(present=True)),
    ("max-age=600; includeSubDomains", HeaderDirective(present=True, max_age_seconds=600)),
    ("; ;; max-age=5 ;", HeaderDirective(present=True, max_age_seconds=5)),
]

HEADER_REJECTS = ["max-age=-5", "max-age=abc", "max-age=", "max-age=1.5", "max-age=1; max-age=2"]


class TestParseSubscriptionHeader:
    @pytest.mark.parametrize("raw,expected", HEADER_CASES)
    def test_table(self, raw, expected):
        assert parse_subscription_header(raw) == expected

    @pytest.mark.parametrize("raw", HEADER_REJECTS)
    def test_rejects(self, raw):
        with pytest.raises(HeaderParseError):
            parse_subscription_header(raw)


class TestAddClientSide:
    def test_defaults_to_strict_active_warning(self):
        store = WhitelistStore()
        entry = store.add_client_side("bank.example", now=T0)
        assert entry.level is PolicyLevel.STRICT
        assert entry.handling is ErrorHandling.ACTIVE_WARNING
        assert entry.source is SubscriptionSource.CLIENT_SIDE
        assert entry.expires_at is None

    def test_blocking_opt_in(self):
        store = WhitelistStore()
        entry = store.add_client_side("bank.example", handling=ErrorHandling.BLOCKING, now=T0)
        assert entry.handling is ErrorHandling.BLOCKING

    def test_duplicate_rejected_without_overwrite(self):
        store = WhitelistStore()
        store.add_client_side("bank.example", now=T0)
        with pytest.raises(DuplicateDomainError):
            store.add_client_side("bank.example", handling=ErrorHandling.BLOCKING, now=T0)
        assert store.get("bank.example").handling is ErrorHandling.ACTIVE_WARNING

    def test_input_normalized_before_insert(self):
        store = WhitelistStore()
        entry = store.add_client_side("https://Bank.Example:443/x", now=T0)
        assert entry.domain == "bank.example"


class TestSubscribeFromHeader:
    def test_name_only_form(self):
        store = WhitelistStore()
        entry = store.subscribe_from_header("secure.example", HeaderDirective(present=True), now=T0)
        assert entry is not None
        assert entry.level is PolicyLevel.STRICT
        assert entry.handling is ErrorHandling.BLOCKING
        assert entry.source is SubscriptionSource.SERVER_HEADER
        assert entry.expires_at is None

    def test_max_age_sets_expiry(self):
        store = WhitelistStore()
        directive = HeaderDirective(present=True, max_age_seconds=100)
        entry = store.subscribe_from_header("secure.example", directive, now=T0)
        assert entry.expires_at == T0 + 100

    def test_existing_domain_left_unchanged(self):
        store = WhitelistStore()
        first = store.add_client_side("secure.example", now=T0)
        before = store.revision
        result = store.subscribe_from_header("secure.example", HeaderDirective(present=True), now=T0)
        assert result is None
        assert store.revision == before
        assert store.get("secure.example") == first

    def test_zero_max_age_never_inserts(self):
        store = WhitelistStore()
        directive = HeaderDirective(present=True, max_age_seconds=0)
        assert store.subscribe_from_header("secure.example", directive, now=T0) is None
        assert len(store) == 0


def naive_lookup(entries: dict[str, DomainEntry], host: str):
    """Independent matching oracle: linear scan, dot-boundary suffix,
    longest domain wins."""
    best = None
    for domain, entry in entries.items():
        if host == domain or host.endswith("." + domain):
            if best is None or len(domain) > len(best.domain):
                best = entry
    return best


class TestLookup:
    def test_subdomain_matches_parent(self):
        store = WhitelistStore()
        store.add_client_side("example.com", now=T0)
        found = store.lookup("mail.example.com")
        assert found is not None and found.domain == "example.com"

    def test_exact_match(self):
        store = WhitelistStore()
        store.add_client_side("example.com", now=T0)
        assert store.lookup("example.com").domain == "example.com"

    def test_substring_without_dot_boundary_misses(self):
        store = WhitelistStore()
        store.add_client_side("example.com", now=T0)
        assert store.lookup("notexample.com") is None

    def test_longest_match_wins(self):
        store = WhitelistStore()
        store.add_client_side("example.com", now=T0)
        store.add_client_side("mail.example.com", handling=ErrorHandling.BLOCKING, now=T0)
        assert store.lookup("a.mail.example.com").domain == "mail.example.com"
        assert store.lookup("web.example.com").domain == "example.com"

    @given(
        domains=st.lists(
            st.sampled_from(
                ["example.com", "mail.example.com", "a.mail.example.com", "examp.le",
                 "example.org", "co.uk", "bank.co.uk", "xexample.com"]
            ),
            unique=True,
            min_size=0,
            max_size=6,
        ),
        host_labels=st.lists(
            st.sampled_from(["a", "mail", "bank", "example", "xexample", "com", "org", "le", "co", "uk"]),
            min_size=2,
            max_size=5,
        ),
    )
    @settings(max_examples=200, deadline=None)
    def test_matches_naive_oracle(self, domains, host_labels):
        store = WhitelistStore()
        for domain in domains:
            store.add_client_side(domain, now=T0)
        host = ".".join(host_labels)
        entries = {e.domain: e for e in store.entries()}
        expected = naive_lookup(entries, host)
        assert store.lookup(host) == expected


class TestRelaxRemovePurge:
    def test_relax_sets_default_level_only(self):
        store = WhitelistStore()
        store.add_client_side("bank.example", handling=ErrorHandling.BLOCKING, now=T0)
        relaxed = store.relax("bank.example")
        assert relaxed.level is PolicyLevel.DEFAULT
        assert relaxed.handling is ErrorHandling.BLOCKING
        assert relaxed.added_at == T0

    def test_relax_is_idempotent_on_level(self):
        store = WhitelistStore()
        store.add_client_side("bank.example", now=T0)
        store.relax("bank.example")
        again = store.relax("bank.example")
        assert again.level is PolicyLevel.DEFAULT

    def test_relax_leaves_other_entries_alone(self):
        store = WhitelistStore()
        store.add_client_side("one.example", now=T0)
        store.add_client_side("two.example", now=T0)
        other_before = store.get("two.example")
        store.relax("one.example")
        assert store.get("two.example") == other_before
        assert store.get("two.example").level is PolicyLevel.STRICT

    def test_relax_missing_domain(self):
        with pytest.raises(DomainNotFoundError):
            WhitelistStore().relax("ghost.example")

    def test_remove_then_readd(self):
        store = WhitelistStore()
        store.add_client_side("bank.example", now=T0)
        removed = store.remove("bank.example")
        assert removed.domain == "bank.example"
        assert store.lookup("bank.example") is None
        store.add_client_side("bank.example", handling=ErrorHandling.BLOCKING, now=T0)
        assert store.get("bank.example").handling is ErrorHandling.BLOCKING

    def test_remove_missing_domain(self):
        with pytest.raises(DomainNotFoundError):
            WhitelistStore().remove("ghost.example")

    def test_purge_boundary_is_inclusive(self):
        store = WhitelistStore()
        store.subscribe_from_header(
            "a.example", HeaderDirective(present=True, max_age_seconds=100), now=0.0
        )
        assert store.purge_expired(now=100.0) == ["a.example"]

    def test_purge_ignores_unexpiring_entries(self):
        store = WhitelistStore()
        store.add_client_side("a.example", now=T0)
        assert store.purge_expired(now=T0 + 10_000) == []
        assert len(store) == 1

    def test_purge_filters_exactly_the_expired(self):
        store = WhitelistStore()
        store.subscribe_from_header("a.example", HeaderDirective(True, 50), now=0.0)
        store.subscribe_from_header("b.example", HeaderDirective(True, 200), now=0.0)
        store.add_client_side("c.example", now=0.0)
        now = 100.0
        # Independent filter oracle over the entry set.
        expected = sorted(
            e.domain
            for e in store.entries()
            if e.expires_at is not None and e.expires_at <= now
        )
        assert sorted(store.purge_expired(now=now)) == expected == ["a.example"]
        assert {e.domain for e in store.entries()} == {"b.example", "c.example"}


@st.composite
def stores(draw):
    count = draw(st.integers(min_value=1, max_value=6))
    store = WhitelistStore()
    for i in range(count):
        handling = draw(st.sampled_from(list(ErrorHandling)))
        store.add_client_side(f"d{i}.example", handling=handling, now=T0)
        if draw(st.booleans()):
            store.relax(f"d{i}.example")
    return store


class TestStoreProperties:
    @given(store=stores(), victim=st.integers(min_value=0, max_value=5))
    @settings(max_examples=60, deadline=None)
    def test_relax_isolation(self, store, victim):
        entries = store.entries()
        target = entries[victim % len(entries)].domain
        before = {e.domain: e for e in entries if e.domain != target}
        store.relax(target)
        after = {e.domain: e for e in store.entries() if e.domain != target}
        assert before == after
        assert store.get(target).level is PolicyLevel.DEFAULT

    @given(store=stores())
    @settings(max_examples=60, deadline=None)
    def test_round_trip_identity(self, store, tmp_path_factory):
        path = tmp_path_factory.mktemp("store") / "wl.json"
        save_store(store, path)
        assert load_store(path) == store

    def test_revision_counts_mutations(self):
        store = WhitelistStore()
        assert store.revision == 0
        store.add_client_side("a.example", now=T0)
        store.add_client_side("b.example", now=T0)
        store.relax("a.example")
        store.remove("b.example")
        assert store.revision == 4


class TestPersistence:
    def test_round_trip_three_entries(self, tmp_path):
        store = WhitelistStore()
        store.add_client_side("a.example", now=T0)
        store.add_client_side("b.example", handling=ErrorHandling.BLOCKING, now=T0)
        store.subscribe_from_header("c.example", HeaderDirective(True, 60), now=T0)
        path = tmp_path / "wl.json"
        save_store(store, path)
        loaded = load_store(path)
        assert loaded == store
        assert loaded.revision == store.revision

    def test_unknown_schema_version(self, tmp_path):
        path = tmp_path / "wl.json"
        path.write_text(json.dumps({"schema_version": 99, "revision": 0, "entries": []}))
        with pytest.raises(StoreFormatError, match="schema_version"):
            load_store(path)

    def test_duplicate_domains_rejected_at_rest(self):
        record = {
            "domain": "a.example",
            "level": "strict",
            "handling": "blocking",
            "source": "client",
            "added_at": T0,
        }
        with pytest.raises(StoreFormatError, match="duplicate"):
            store_from_document(
                {"schema_version": 1, "revision": 2, "entries": [record, dict(record)]}
            )

    def test_malformed_record_names_offender(self):
        with pytest.raises(StoreFormatError, match="bad.example"):
            store_from_document(
                {
                    "schema_version": 1,
                    "revision": 1,
                    "entries": [
                        {
                            "domain": "bad.example",
                            "level": "ultra",
                            "handling": "blocking",
                            "source": "client",
                            "added_at": T0,
                        }
                    ],
                }
            )

    def test_header_source_requires_blocking_at_rest(self):
        with pytest.raises(StoreFormatError):
            store_from_document(
                {
                    "schema_version": 1,
                    "revision": 1,
                    "entries": [
                        {
                            "domain": "a.example",
                            "level": "strict",
                            "handling": "active_warning",
                            "source": "header",
                            "added_at": T0,
                        }
                    ],
                }
            )

    def test_canonical_json_is_stable(self):
        store = WhitelistStore()
        store.add_client_side("b.example", now=T0)
        store.add_client_side("a.example", now=T0)
        first = canonical_json(store.to_document())
        second = canonical_json(store.to_document())
        assert first == second
        # Entries come out sorted by domain regardless of insertion order.
        assert first.index('"a.example"') < first.index('"b.example"')


class TestEntryInvariants:
    def test_header_source_must_block(self):
        with pytest.raises(ValueError):
            DomainEntry(
                domain="a.example",
                level=PolicyLevel.STRICT,
                handling=ErrorHandling.ACTIVE_WARNING,
                source=SubscriptionSource.SERVER_HEADER,
                added_at=T0,
            )

    def test_expiry_must_follow_addition(self):
        with pytest.raises(ValueError):
            DomainEntry(
                domain="a.example",
                level=PolicyLevel.STRICT,
                handling=ErrorHandling.BLOCKING,
                source=SubscriptionSource.SERVER_HEADER,
                added_at=T0,
                expires_at=T0,
            )


class TestConcurrency:
    def test_parallel_adds_stay_unique_and_counted(self):
        store = WhitelistStore()
        domains = [f"d{i}.example" for i in range(20)] * 2
        failures = []

        def add(domain):
            try:
                store.add_client_side(domain, now=T0)
            except DuplicateDomainError:
                failures.append(domain)

        threads = [threading.Thread(target=add, args=(d,)) for d in domains]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(store) == 20
        assert len(failures) == 20
        assert store.revision == 20
