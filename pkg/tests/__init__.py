"""Tests for chargecast."""
