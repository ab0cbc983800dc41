#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "synthctx/core.hpp"

namespace synthctx {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

// Dataset file: UTF-8, LF-terminated lines. Line 1 is the manifest record,
// every following line one Example. Field order is fixed by these encoders,
// so encode(decode(line)) == line for any line they produced.
ordered_json to_json(const Document& d);
ordered_json to_json(const NeedleSpan& s);
ordered_json to_json(const Example& ex);
ordered_json to_json(const TokenizerSpec& t);
ordered_json to_json(const DatasetManifest& m);

// Decoders throw ParseError naming the offending field. Unknown keys are
// rejected.
Document document_from_json(const json& j);
Example example_from_json(const json& j);
TokenizerSpec tokenizer_from_json(const json& j);
DatasetManifest manifest_from_json(const json& j);

std::string dump_line(const ordered_json& j);

std::string serialize_example(const Example& ex);
Example parse_example(std::string_view line);

struct Dataset {
    DatasetManifest manifest;
    std::vector<Example> examples;
};

std::string serialize_dataset(const DatasetManifest& manifest, std::span<const Example> examples);
Dataset parse_dataset(std::string_view content);

void write_dataset(const std::filesystem::path& path, const DatasetManifest& manifest,
                   std::span<const Example> examples);
Dataset read_dataset(const std::filesystem::path& path);

// Distractor pool: one Document record per line, no manifest.
std::vector<Document> read_document_pool(const std::filesystem::path& path);

// Splits on '\n'; a trailing empty segment is dropped.
std::vector<std::string_view> split_lines(std::string_view content);

}  // namespace synthctx
