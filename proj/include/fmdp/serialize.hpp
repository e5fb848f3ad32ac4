#pragma once

#include <iosfwd>
#include <string>

#include "fmdp/model.hpp"

namespace fmdp {

// Models are stored as JSON documents:
//   {"format": "fmdp-model", "version": 1,
//    "state_sizes": [...], "action_sizes": [...],
//    "transitions": [{"scope": [...], "rows": [[p, ...], ...]}, ...],
//    "rewards": [{"scope": [...], "cells": [{"values": [...], "probs": [...]}, ...]}, ...]}
// Numbers are written with round-trip precision, so load(save(m)) reproduces m exactly.

void saveModel(const Fmdp& model, std::ostream& out);
Fmdp loadModel(std::istream& in);

void saveModelFile(const Fmdp& model, const std::string& path);
Fmdp loadModelFile(const std::string& path);

}  // namespace fmdp
