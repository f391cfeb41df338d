from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from localgeo.corpus import Article
from localgeo.gazetteer import load_gazetteer

DATA = Path(__file__).parent / "data"
T0 = datetime(2024, 6, 1, 12, 0, tzinfo=timezone.utc)

# length-4 cover of the King County fixture box, pinned from tests/oracles.cover_bruteforce
KING_COUNTY_CELLS = frozenset("""
c22g c22u c22v c22y c22z c235 c237 c23e c23g c23h c23j c23k c23m
c23n c23p c23q c23r c23s c23t c23u c23v c23w c23x c23y c23z
""".split())


@pytest.fixture(scope="session")
def gaz():
    return load_gazetteer(DATA / "gazetteer.tsv")


def make_article(aid, title="", body="", publisher="pub", snippet="", when=None, url=None):
    return Article(
        id=aid,
        title=title,
        snippet=snippet,
        body=body,
        url=url or f"https://news.example.com/{aid}",
        publisher=publisher,
        published_at=when or T0,
    )


@pytest.fixture
def article_factory():
    return make_article


@pytest.fixture
def hours():
    return lambda n: T0 + timedelta(hours=n)


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    from localgeo.app import synth

    out = tmp_path_factory.mktemp("synth")
    synth.write(synth.generate(3), out)
    return out


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
