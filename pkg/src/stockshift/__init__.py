# SPDX-FileCopyrightText: 2025-present meowmeowahr <meowmeowahr@gmail.com>
#
# SPDX-License-Identifier: LGPL-3.0-or-later
"""Lateral stock redistribution between warehouses and outlets, with packing of the transfers."""

from stockshift.__about__ import __version__

__all__ = ["__version__"]
