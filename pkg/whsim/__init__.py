from whsim.version import __version__
