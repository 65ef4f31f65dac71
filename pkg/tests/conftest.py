from hypothesis import settings

# property tests must be deterministic across runs
settings.register_profile("deterministic", derandomize=True, deadline=None)
settings.load_profile("deterministic")
