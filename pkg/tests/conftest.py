import warnings

import pytest

from angiokit import phantom, pipeline
from angiokit.core import Config

warnings.filterwarnings("ignore", category=RuntimeWarning)

RENDER_SEED = 1


class SuiteCache:
    """Renders and analyzes each standard-suite phantom at most once."""

    def __init__(self):
        self.cfg = Config()
        self._rendered = {}
        self._contexts = {}
        self._reports = {}

    def rendered(self, name):
        if name not in self._rendered:
            self._rendered[name] = phantom.render_phantom(
                phantom.suite_spec(name), RENDER_SEED)
        return self._rendered[name]

    def context(self, name):
        if name not in self._contexts:
            img, _ = self.rendered(name)
            self._contexts[name] = pipeline.prepare_context(img, self.cfg, context_id=name)
        return self._contexts[name]

    def report(self, name):
        if name not in self._reports:
            self._reports[name] = pipeline.run_auto(self.context(name))
        return self._reports[name]


@pytest.fixture(scope="session")
def suite():
    return SuiteCache()


@pytest.fixture(scope="session")
def cfg():
    return Config()
