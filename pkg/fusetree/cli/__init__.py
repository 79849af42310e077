"""CLI module for fusetree.

Contains the click command group, its commands and the artifact writer.
"""
