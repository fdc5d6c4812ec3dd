"""Lifted linear relaxations and cutting planes for AC optimal power flow."""

__version__ = "0.1.0"
