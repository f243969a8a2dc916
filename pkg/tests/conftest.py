import os

from hypothesis import HealthCheck, settings

# The acceptance suite re-runs the property tests on fresh class instances;
# none of them touch ``self``, so differing executors are harmless here.
_SUPPRESS = [HealthCheck.too_slow, HealthCheck.differing_executors]

settings.register_profile("default", max_examples=100, deadline=None, suppress_health_check=_SUPPRESS)
settings.register_profile("ci", max_examples=300, deadline=None, suppress_health_check=_SUPPRESS)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))
