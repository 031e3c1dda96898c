import os

import hypothesis

hypothesis.settings.register_profile("default", deadline=None)
hypothesis.settings.register_profile("ci", deadline=None, max_examples=25)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))
