from __future__ import annotations

import pytest

from envsniff.api_bank import build_index
from envsniff.release_ingest import ingest_source_tree
from fixturelib import FIXTURES, PANDAS_REEXPORT, TOYLIB_VERSIONS, build_fixture_index, build_wheel


@pytest.fixture(scope="session")
def pandas_release():
    return ingest_source_tree(str(PANDAS_REEXPORT), "pandas", "1.0.0")


@pytest.fixture(scope="session")
def toylib_releases():
    return [
        ingest_source_tree(str(FIXTURES / "toylib" / version), "toylib", version)
        for version in TOYLIB_VERSIONS
    ]


@pytest.fixture(scope="session")
def toylib_index(toylib_releases):
    return build_index(list(toylib_releases))


@pytest.fixture(scope="session")
def fixture_wheels(tmp_path_factory):
    """Wheels for every toylib version plus brokenlib, keyed by (name, version)."""
    wheel_dir = tmp_path_factory.mktemp("wheels")
    wheels = {}
    for version in TOYLIB_VERSIONS:
        wheels[("toylib", version)] = build_wheel(
            FIXTURES / "toylib" / version, "toylib", version, wheel_dir
        )
    wheels[("brokenlib", "1.0")] = build_wheel(
        FIXTURES / "brokenlib" / "1.0", "brokenlib", "1.0", wheel_dir
    )
    return wheels


@pytest.fixture(scope="session")
def fixture_index_url(tmp_path_factory, fixture_wheels):
    """file:// base URL of a local package index serving the fixture wheels."""
    index_dir = tmp_path_factory.mktemp("index")
    projects: dict[str, list] = {}
    for (name, version), (path, checksum) in sorted(fixture_wheels.items()):
        projects.setdefault(name, []).append((version, path, checksum))
    return build_fixture_index(
        index_dir, projects, extra_versions={"toylib": ["0.0.1"]}
    )
