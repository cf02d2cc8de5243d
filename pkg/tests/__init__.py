"""Tests for the APC/CPC speech representation toolkit."""
