"""Test suite for deltaspec."""
