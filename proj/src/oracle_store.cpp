#include "supercut/binary_io.hpp"
#include "supercut/error.hpp"
#include "supercut/mask_oracle.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace supercut {

using nlohmann::json;

namespace {

std::string key_name(std::int32_t view_id, std::int32_t sp_id) {
  return "(view " + std::to_string(view_id) + ", sp " + std::to_string(sp_id) + ")";
}

}  // namespace

OracleStore OracleStore::load(const std::filesystem::path& dir) {
  OracleStore store;
  const auto index_path = dir / "index.json";
  std::ifstream in(index_path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + index_path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, index_path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "supercut-oracle") throw Error(ErrorCode::kFormat, index_path.string() + ": not an oracle index");
  if (doc.value("version", 0) != 1) throw Error(ErrorCode::kVersionMismatch, index_path.string() + ": unsupported version");
  if (!doc.contains("records") || !doc["records"].is_array()) {
    throw Error(ErrorCode::kFormat, index_path.string() + ": missing records array");
  }
  for (const auto& rec : doc["records"]) {
    try {
      const auto view_id = rec.at("view_id").get<std::int32_t>();
      const auto sp_id = rec.at("sp_id").get<std::int32_t>();
      Record r{rec.at("offset").get<std::uint64_t>(), rec.at("height").get<std::int32_t>(),
               rec.at("width").get<std::int32_t>()};
      if (!store.index_.emplace(std::make_pair(view_id, sp_id), r).second) {
        throw Error(ErrorCode::kFormat, "duplicate record " + key_name(view_id, sp_id));
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormat, index_path.string() + ": malformed record: " + e.what());
    }
  }
  const auto blob_path = dir / "masks.bin";
  if (std::filesystem::exists(blob_path)) {
    store.blob_ = read_file(blob_path);
  } else if (!store.index_.empty()) {
    throw Error(ErrorCode::kIo, "missing " + blob_path.string());
  }
  return store;
}

OracleResponse OracleStore::get(std::int32_t view_id, std::int32_t sp_id) const {
  const auto it = index_.find({view_id, sp_id});
  if (it == index_.end()) throw Error(ErrorCode::kMissingOracleData, "no oracle response for " + key_name(view_id, sp_id));
  const auto& rec = it->second;
  const std::string ctx = "masks.bin record " + key_name(view_id, sp_id);
  try {
    ByteReader r(blob_, ctx);
    r.seek(rec.offset);
    OracleResponse resp;
    for (auto& cand : resp.candidates) {
      const auto len = r.get<std::uint32_t>();
      if (len > r.remaining() / 4) throw Error(ErrorCode::kFormat, ctx + ": RLE length exceeds file");
      std::vector<std::uint32_t> counts(len);
      r.get_array(std::span<std::uint32_t>(counts));
      cand.mask = RleMask(rec.height, rec.width, std::move(counts));
      cand.confidence = r.get<float>();
    }
    validate_response(resp);
    return resp;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kFormat || e.code() == ErrorCode::kTruncated) {
      throw Error(ErrorCode::kFormat, ctx + ": " + e.what());
    }
    throw;
  }
}

void OracleStore::validate_all() const {
  for (const auto& [key, rec] : index_) (void)get(key.first, key.second);
}

std::vector<std::pair<std::int32_t, std::int32_t>> OracleStore::keys() const {
  std::vector<std::pair<std::int32_t, std::int32_t>> out;
  for (const auto& [key, rec] : index_) out.push_back(key);
  return out;
}

void OracleStoreWriter::add(std::int32_t view_id, std::int32_t sp_id, const OracleResponse& response) {
  validate_response(response);
  responses_[{view_id, sp_id}] = response;
}

void OracleStoreWriter::write(const std::filesystem::path& dir, const std::string& model_id) const {
  std::filesystem::create_directories(dir);
  ByteWriter blob;
  json records = json::array();
  for (const auto& [key, resp] : responses_) {
    records.push_back({{"view_id", key.first},
                       {"sp_id", key.second},
                       {"offset", blob.size()},
                       {"height", resp.candidates[0].mask.height()},
                       {"width", resp.candidates[0].mask.width()}});
    for (const auto& cand : resp.candidates) {
      blob.put(static_cast<std::uint32_t>(cand.mask.counts().size()));
      blob.put_array(std::span<const std::uint32_t>(cand.mask.counts()));
      blob.put(cand.confidence);
    }
  }
  const json doc = {{"format", "supercut-oracle"}, {"version", 1}, {"model", model_id}, {"records", records}};
  write_file_atomic(dir / "masks.bin", blob.bytes());
  write_text_atomic(dir / "index.json", doc.dump(1));
}

OracleResponse FileOracle::query(const PromptSet& prompt) const { return store_.get(prompt.view_id, prompt.sp_id); }

OracleResponse query_file_oracle(const OracleStore& store, std::int32_t view_id, const PromptSet& prompt) {
  return store.get(view_id, prompt.sp_id);
}

}  // namespace supercut
