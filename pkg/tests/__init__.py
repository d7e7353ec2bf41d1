# Tests for affordance framework
