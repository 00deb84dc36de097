//! Guide doctest shim; chapters are added as the book is written.
