#!/usr/bin/env python

import setuptools

# This is a boilerplate setup.py to enable editable installs.
# Configurations are in the setup.cfg.
if __name__ == "__main__":
    setuptools.setup()
