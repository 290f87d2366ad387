"""Tool handler sub-modules, one per catalogue entry.

Nothing in here is imported until a client calls ``import_module``; the
registry binds each module's HANDLERS mapping at that point.
"""
