from hypothesis import settings

settings.register_profile("qloop", deadline=None, max_examples=60)
settings.load_profile("qloop")
