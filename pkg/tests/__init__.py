"""Tests for the pco_sync package."""
