"""CUMI Toolkit modules"""
