"""
Filament lab package marker.
"""
