# Tests package for AI Fashion Backend
