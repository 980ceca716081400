"""Acceptance gates for the filament lab."""
