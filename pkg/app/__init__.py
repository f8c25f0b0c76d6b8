"""Simulator and analysis toolkit for a coupler-controlled iSWAP."""
