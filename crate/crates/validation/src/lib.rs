//! Acceptance criteria for `hiersparse`, run as the `acceptance` test target.
