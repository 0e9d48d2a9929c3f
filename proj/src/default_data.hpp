// Copyright 2026 The kbvqa Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef KBVQA_DEFAULT_DATA_HPP_
#define KBVQA_DEFAULT_DATA_HPP_

#include <string_view>

// Contents of data/lexicon/*.tsv and data/stopwords.txt, embedded at build
// time.
namespace kbvqa::data {

extern const std::string_view kTaxonomy;
extern const std::string_view kSynsets;
extern const std::string_view kPlurals;
extern const std::string_view kPredicates;
extern const std::string_view kStopwords;

}  // namespace kbvqa::data

#endif  // KBVQA_DEFAULT_DATA_HPP_
