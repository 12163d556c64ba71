#pragma once

#include "fedclip/classical.hpp"
#include "fedclip/models.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace fedclip {

inline constexpr const char* kCheckpointFormat = "fedclip-checkpoint";
inline constexpr int kCheckpointVersion = 1;

/// Checkpoints are JSON documents tagged with a kind ("encoder", "knn",
/// "svm"). Doubles are written in shortest round-trip form, so reading back
/// reproduces every parameter bit for bit.
nlohmann::json to_checkpoint(const EncoderModel& model);
nlohmann::json to_checkpoint(const KnnModel& model);
nlohmann::json to_checkpoint(const SvmModel& model);

EncoderModel encoder_from_checkpoint(const nlohmann::json& doc);
KnnModel knn_from_checkpoint(const nlohmann::json& doc);
SvmModel svm_from_checkpoint(const nlohmann::json& doc);

/// Kind tag of a checkpoint document; throws DataError on foreign documents.
std::string checkpoint_kind(const nlohmann::json& doc);

void write_json(const nlohmann::json& doc, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace fedclip
