#include "cico/formats.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cico/errors.hpp"

namespace cico {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failed on " + path);
  return buf.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failed on " + path);
}

json parse_json(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw FormatError(what + ": malformed JSON");
  return j;
}

int require_int(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number_integer())
    throw FormatError(where + ": missing or non-integer field '" + key + "'");
  return j[key].get<int>();
}

double require_num(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number())
    throw FormatError(where + ": missing or non-numeric field '" + key + "'");
  return j[key].get<double>();
}

json rle_to_json(const Rle& rle) {
  return json{{"size", {rle.height, rle.width}}, {"counts", rle.counts}};
}

Rle rle_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("size") || !j.contains("counts"))
    throw FormatError(where + ": RLE must carry 'size' and 'counts'");
  const json& size = j["size"];
  if (!size.is_array() || size.size() != 2)
    throw FormatError(where + ": RLE size must be [height, width]");
  Rle rle;
  rle.height = size[0].get<int>();
  rle.width = size[1].get<int>();
  if (rle.height <= 0 || rle.width <= 0)
    throw FormatError(where + ": RLE dimensions must be positive");
  const json& counts = j["counts"];
  if (!counts.is_array())
    throw FormatError(where + ": RLE counts must be an array");
  uint64_t sum = 0;
  for (const json& c : counts) {
    if (!c.is_number_integer() || c.get<int64_t>() < 0)
      throw FormatError(where + ": RLE counts must be non-negative integers");
    rle.counts.push_back(c.get<uint32_t>());
    sum += rle.counts.back();
  }
  if (sum != static_cast<uint64_t>(rle.height) * rle.width)
    throw FormatError(where + ": RLE counts sum to " + std::to_string(sum) +
                      ", expected " +
                      std::to_string(static_cast<uint64_t>(rle.height) * rle.width));
  return rle;
}

}  // namespace

const VideoInfo* AnnotationSet::find_video(int id) const {
  for (const VideoInfo& v : videos)
    if (v.id == id) return &v;
  return nullptr;
}

const CategoryInfo* AnnotationSet::find_category(int id) const {
  for (const CategoryInfo& c : categories)
    if (c.id == id) return &c;
  return nullptr;
}

AnnotationSet read_annotations(const std::string& path) {
  const json j = parse_json(read_file(path), path);
  if (!j.is_object() || !j.contains("videos") || !j.contains("categories") ||
      !j.contains("annotations"))
    throw FormatError(path +
                      ": expected object with videos, categories, annotations");
  AnnotationSet set;
  std::set<int> seen;
  for (size_t i = 0; i < j["videos"].size(); ++i) {
    const std::string where = path + ": videos[" + std::to_string(i) + "]";
    const json& v = j["videos"][i];
    VideoInfo info;
    info.id = require_int(v, "id", where);
    info.width = require_int(v, "width", where);
    info.height = require_int(v, "height", where);
    info.length = require_int(v, "length", where);
    if (info.width <= 0 || info.height <= 0 || info.length <= 0)
      throw FormatError(where + ": dimensions and length must be positive");
    if (!seen.insert(info.id).second)
      throw FormatError(where + ": duplicate video id " + std::to_string(info.id));
    set.videos.push_back(info);
  }
  seen.clear();
  for (size_t i = 0; i < j["categories"].size(); ++i) {
    const std::string where = path + ": categories[" + std::to_string(i) + "]";
    const json& c = j["categories"][i];
    CategoryInfo info;
    info.id = require_int(c, "id", where);
    if (!c.contains("name") || !c["name"].is_string())
      throw FormatError(where + ": missing category name");
    info.name = c["name"].get<std::string>();
    if (!seen.insert(info.id).second)
      throw FormatError(where + ": duplicate category id " +
                        std::to_string(info.id));
    set.categories.push_back(info);
  }
  seen.clear();
  for (size_t i = 0; i < j["annotations"].size(); ++i) {
    const std::string where = path + ": annotations[" + std::to_string(i) + "]";
    const json& a = j["annotations"][i];
    Annotation ann;
    ann.id = require_int(a, "id", where);
    ann.video_id = require_int(a, "video_id", where);
    ann.category_id = require_int(a, "category_id", where);
    if (!seen.insert(ann.id).second)
      throw FormatError(where + ": duplicate annotation id " +
                        std::to_string(ann.id));
    const VideoInfo* video = set.find_video(ann.video_id);
    if (!video)
      throw FormatError(where + ": unknown video id " +
                        std::to_string(ann.video_id));
    if (!set.find_category(ann.category_id))
      throw FormatError(where + ": unknown category id " +
                        std::to_string(ann.category_id));
    if (!a.contains("segmentations") || !a["segmentations"].is_array() ||
        !a.contains("bboxes") || !a["bboxes"].is_array())
      throw FormatError(where + ": segmentations and bboxes arrays required");
    if (a["segmentations"].size() != static_cast<size_t>(video->length) ||
        a["bboxes"].size() != static_cast<size_t>(video->length))
      throw FormatError(where + ": per-frame arrays must have video length " +
                        std::to_string(video->length));
    for (size_t f = 0; f < a["segmentations"].size(); ++f) {
      const json& seg = a["segmentations"][f];
      if (seg.is_null()) {
        ann.segmentations.push_back(std::nullopt);
        continue;
      }
      const std::string seg_where =
          where + ".segmentations[" + std::to_string(f) + "]";
      Rle rle = rle_from_json(seg, seg_where);
      if (rle.height != video->height || rle.width != video->width)
        throw FormatError(seg_where + ": RLE size [" + std::to_string(rle.height) +
                          "," + std::to_string(rle.width) +
                          "] does not match video size [" +
                          std::to_string(video->height) + "," +
                          std::to_string(video->width) + "]");
      ann.segmentations.push_back(std::move(rle));
    }
    for (size_t f = 0; f < a["bboxes"].size(); ++f) {
      const json& bb = a["bboxes"][f];
      if (bb.is_null()) {
        ann.bboxes.push_back(std::nullopt);
        continue;
      }
      const std::string bb_where = where + ".bboxes[" + std::to_string(f) + "]";
      if (!bb.is_array() || bb.size() != 4)
        throw FormatError(bb_where + ": box must be [x, y, w, h]");
      std::array<double, 4> box{};
      for (int k = 0; k < 4; ++k) {
        if (!bb[k].is_number())
          throw FormatError(bb_where + ": box entries must be numeric");
        box[static_cast<size_t>(k)] = bb[k].get<double>();
      }
      if (box[2] < 0 || box[3] < 0)
        throw FormatError(bb_where + ": box size must be non-negative");
      ann.bboxes.push_back(box);
    }
    set.annotations.push_back(std::move(ann));
  }
  return set;
}

void write_annotations(const AnnotationSet& set, const std::string& path) {
  json j;
  j["videos"] = json::array();
  for (const VideoInfo& v : set.videos)
    j["videos"].push_back({{"id", v.id},
                           {"width", v.width},
                           {"height", v.height},
                           {"length", v.length}});
  j["categories"] = json::array();
  for (const CategoryInfo& c : set.categories)
    j["categories"].push_back({{"id", c.id}, {"name", c.name}});
  j["annotations"] = json::array();
  for (const Annotation& a : set.annotations) {
    json seg = json::array();
    for (const auto& s : a.segmentations)
      seg.push_back(s ? rle_to_json(*s) : json(nullptr));
    json boxes = json::array();
    for (const auto& b : a.bboxes)
      boxes.push_back(b ? json(*b) : json(nullptr));
    j["annotations"].push_back({{"id", a.id},
                                {"video_id", a.video_id},
                                {"category_id", a.category_id},
                                {"segmentations", std::move(seg)},
                                {"bboxes", std::move(boxes)}});
  }
  write_file(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Network output container.
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'C', 'C', 'O', '1'};
constexpr uint32_t kVersion = 1;

void append_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t read_u32(const std::string& bytes, size_t pos) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<uint32_t>(static_cast<uint8_t>(bytes[pos + i])) << (8 * i);
  return v;
}

uint64_t read_u64(const std::string& bytes, size_t pos) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<uint64_t>(static_cast<uint8_t>(bytes[pos + i])) << (8 * i);
  return v;
}

void append_floats(std::string& out, const float* data, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    uint32_t bits;
    std::memcpy(&bits, &data[i], 4);
    append_u32(out, bits);
  }
}

std::vector<float> read_floats(const std::string& payload, uint64_t offset,
                               size_t n) {
  std::vector<float> out(n);
  for (size_t i = 0; i < n; ++i) {
    const uint32_t bits = read_u32(payload, offset + 4 * i);
    std::memcpy(&out[i], &bits, 4);
  }
  return out;
}

uint64_t shape_elems(const std::vector<int>& shape, const std::string& where) {
  uint64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw FormatError(where + ": negative tensor dimension");
    n *= static_cast<uint64_t>(d);
  }
  return n;
}

struct TensorRef {
  std::string name;
  std::vector<int> shape;
  uint64_t offset = 0;
  uint64_t bytes = 0;
};

TensorRef tensor_ref(const json& j, const std::string& name) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("offset"))
    throw FormatError("tensor '" + name + "': needs shape and offset");
  if (j.contains("dtype") && j["dtype"].get<std::string>() != "f32")
    throw FormatError("tensor '" + name + "': only dtype f32 is supported");
  TensorRef ref;
  ref.name = name;
  for (const json& d : j["shape"]) {
    if (!d.is_number_integer())
      throw FormatError("tensor '" + name + "': non-integer shape entry");
    ref.shape.push_back(d.get<int>());
  }
  ref.offset = j["offset"].get<uint64_t>();
  ref.bytes = 4 * shape_elems(ref.shape, "tensor '" + name + "'");
  return ref;
}

json tensor_entry(const std::vector<int>& shape, uint64_t offset) {
  return json{{"shape", shape}, {"dtype", "f32"}, {"offset", offset}};
}

std::string head_name(HeadVariant head) {
  return head == HeadVariant::yolact ? "yolact" : "condinst";
}

HeadVariant head_from_name(const std::string& name, const std::string& where) {
  if (name == "yolact") return HeadVariant::yolact;
  if (name == "condinst") return HeadVariant::condinst;
  throw FormatError(where + ": unknown head variant '" + name + "'");
}

}  // namespace

std::vector<Box> anchors_for_layout(const AnchorLayout& layout) {
  std::vector<Box> out;
  for (size_t level = 0; level < layout.anchors.strides.size(); ++level) {
    const int stride = layout.anchors.strides[level];
    const int rows = (layout.image_h + stride - 1) / stride;
    const int cols = (layout.image_w + stride - 1) / stride;
    const std::vector<Box> level_boxes =
        generate_anchors(layout.anchors, static_cast<int>(level), rows, cols);
    out.insert(out.end(), level_boxes.begin(), level_boxes.end());
  }
  return out;
}

void write_netout(const NetOutContainer& container, const std::string& path) {
  json header;
  header["clips"] = json::array();
  std::string payload;
  uint64_t offset = 0;

  auto add_tensor = [&](json& tensors, const std::string& name,
                        const std::vector<int>& shape, const float* data) {
    const uint64_t elems = shape_elems(shape, "tensor '" + name + "'");
    tensors[name] = tensor_entry(shape, offset);
    append_floats(payload, data, elems);
    offset += elems * 4;
  };

  for (const ClipNetOut& clip : container.clips) {
    json entry;
    entry["video_id"] = clip.video_id;
    entry["clip_index"] = clip.clip_index;
    entry["frame_start"] = clip.frame_start;
    entry["frame_end"] = clip.frame_end;
    entry["head"] = head_name(clip.head);
    json tensors;
    const Tensor4& p = clip.prototypes;
    add_tensor(tensors, "prototypes", {p.t, p.h, p.w, p.c}, p.data.data());
    add_tensor(tensors, "scores", {clip.count, clip.num_classes + 1},
               clip.scores.data());
    add_tensor(tensors, "embeddings", {clip.count, clip.embedding_dim},
               clip.embeddings.data());
    if (clip.has_regression()) {
      add_tensor(tensors, "box_regression", {clip.count, 4 * clip.clip_len()},
                 clip.box_regression.data());
    } else {
      std::vector<float> flat;
      flat.reserve(clip.boxes.size() * 4);
      for (const Box& b : clip.boxes) {
        flat.push_back(static_cast<float>(b.x1));
        flat.push_back(static_cast<float>(b.y1));
        flat.push_back(static_cast<float>(b.x2));
        flat.push_back(static_cast<float>(b.y2));
      }
      add_tensor(tensors, "boxes", {clip.count, clip.clip_len(), 4}, flat.data());
    }
    add_tensor(tensors, "mask_params", {clip.count, clip.mask_param_count},
               clip.mask_params.data());
    entry["tensors"] = std::move(tensors);
    header["clips"].push_back(std::move(entry));
  }

  if (container.anchor_layout) {
    const AnchorLayout& al = *container.anchor_layout;
    header["anchor_layout"] = {{"scales", al.anchors.scales},
                               {"ratios", al.anchors.ratios},
                               {"strides", al.anchors.strides},
                               {"image_h", al.image_h},
                               {"image_w", al.image_w}};
  }

  if (!container.extra.empty()) {
    json extra;
    for (const auto& [name, tensor] : container.extra) {
      extra[name] = tensor_entry(tensor.shape, offset);
      append_floats(payload, tensor.data.data(), tensor.data.size());
      offset += tensor.data.size() * 4;
    }
    header["extra"] = std::move(extra);
  }

  const std::string header_text = header.dump();
  std::string bytes;
  bytes.append(kMagic, 4);
  append_u32(bytes, kVersion);
  append_u64(bytes, header_text.size());
  bytes += header_text;
  bytes += payload;
  write_file(path, bytes);
}

NetOutContainer read_netout(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 16) throw FormatError(path + ": truncated container");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError(path + ": bad magic, expected CCO1");
  const uint32_t version = read_u32(bytes, 4);
  if (version != kVersion)
    throw FormatError(path + ": unsupported version " + std::to_string(version));
  const uint64_t header_len = read_u64(bytes, 8);
  if (16 + header_len > bytes.size())
    throw FormatError(path + ": header length exceeds file size");
  const json header =
      parse_json(bytes.substr(16, header_len), path + ": header");
  const std::string payload = bytes.substr(16 + static_cast<size_t>(header_len));

  if (!header.is_object() || !header.contains("clips") ||
      !header["clips"].is_array())
    throw FormatError(path + ": header must carry a clips array");

  NetOutContainer container;
  std::vector<TensorRef> refs;
  std::set<std::pair<int, int>> clip_keys;

  auto load = [&](const TensorRef& ref) {
    if (ref.offset + ref.bytes > payload.size())
      throw FormatError(path + ": tensor '" + ref.name +
                        "' extends past the payload (offset " +
                        std::to_string(ref.offset) + ", bytes " +
                        std::to_string(ref.bytes) + ", payload " +
                        std::to_string(payload.size()) + ")");
    return read_floats(payload, ref.offset, ref.bytes / 4);
  };

  for (size_t ci = 0; ci < header["clips"].size(); ++ci) {
    const std::string where = path + ": clips[" + std::to_string(ci) + "]";
    const json& entry = header["clips"][ci];
    ClipNetOut clip;
    clip.video_id = require_int(entry, "video_id", where);
    clip.clip_index = require_int(entry, "clip_index", where);
    clip.frame_start = require_int(entry, "frame_start", where);
    clip.frame_end = require_int(entry, "frame_end", where);
    if (clip.frame_start < 0 || clip.frame_end < clip.frame_start)
      throw FormatError(where + ": bad frame range");
    if (!entry.contains("head") || !entry["head"].is_string())
      throw FormatError(where + ": missing head variant");
    clip.head = head_from_name(entry["head"].get<std::string>(), where);
    if (!clip_keys.insert({clip.video_id, clip.clip_index}).second)
      throw FormatError(where + ": duplicate clip index " +
                        std::to_string(clip.clip_index) + " for video " +
                        std::to_string(clip.video_id));
    if (!entry.contains("tensors") || !entry["tensors"].is_object())
      throw FormatError(where + ": missing tensors table");
    const json& tensors = entry["tensors"];

    auto named = [&](const char* name) -> TensorRef {
      if (!tensors.contains(name))
        throw FormatError(where + ": missing tensor '" + name + "'");
      return tensor_ref(tensors[name], where + "." + name);
    };

    const TensorRef proto_ref = named("prototypes");
    if (proto_ref.shape.size() != 4)
      throw FormatError(where + ".prototypes: expected rank 4");
    for (int d : proto_ref.shape)
      if (d <= 0)
        throw FormatError(where + ".prototypes: dimensions must be positive");
    if (proto_ref.shape[0] != clip.clip_len())
      throw FormatError(where + ".prototypes: frame count " +
                        std::to_string(proto_ref.shape[0]) +
                        " does not match clip length " +
                        std::to_string(clip.clip_len()));
    clip.prototypes = Tensor4(proto_ref.shape[0], proto_ref.shape[1],
                              proto_ref.shape[2], proto_ref.shape[3]);
    clip.prototypes.data = load(proto_ref);
    refs.push_back(proto_ref);

    const TensorRef score_ref = named("scores");
    if (score_ref.shape.size() != 2 || score_ref.shape[1] < 2)
      throw FormatError(where +
                        ".scores: expected [count, classes + 1] with >= 2 columns");
    clip.count = score_ref.shape[0];
    if (clip.count < 0) throw FormatError(where + ".scores: negative count");
    clip.num_classes = score_ref.shape[1] - 1;
    clip.scores = load(score_ref);
    refs.push_back(score_ref);

    const TensorRef embed_ref = named("embeddings");
    if (embed_ref.shape.size() != 2 || embed_ref.shape[0] != clip.count ||
        embed_ref.shape[1] < 1)
      throw FormatError(where + ".embeddings: expected [" +
                        std::to_string(clip.count) + ", dim]");
    clip.embedding_dim = embed_ref.shape[1];
    clip.embeddings = load(embed_ref);
    refs.push_back(embed_ref);

    const bool has_boxes = tensors.contains("boxes");
    const bool has_reg = tensors.contains("box_regression");
    if (has_boxes == has_reg)
      throw FormatError(where +
                        ": exactly one of 'boxes' or 'box_regression' required");
    if (has_boxes) {
      const TensorRef box_ref = named("boxes");
      if (box_ref.shape.size() != 3 || box_ref.shape[0] != clip.count ||
          box_ref.shape[1] != clip.clip_len() || box_ref.shape[2] != 4)
        throw FormatError(where + ".boxes: expected [" +
                          std::to_string(clip.count) + ", " +
                          std::to_string(clip.clip_len()) + ", 4]");
      const std::vector<float> flat = load(box_ref);
      clip.boxes.reserve(flat.size() / 4);
      for (size_t i = 0; i + 3 < flat.size(); i += 4)
        clip.boxes.push_back(
            Box{flat[i], flat[i + 1], flat[i + 2], flat[i + 3]});
      refs.push_back(box_ref);
    } else {
      const TensorRef reg_ref = named("box_regression");
      if (reg_ref.shape.size() != 2 || reg_ref.shape[0] != clip.count ||
          reg_ref.shape[1] != 4 * clip.clip_len())
        throw FormatError(where + ".box_regression: expected [" +
                          std::to_string(clip.count) + ", " +
                          std::to_string(4 * clip.clip_len()) + "]");
      clip.box_regression = load(reg_ref);
      refs.push_back(reg_ref);
    }

    const TensorRef mask_ref = named("mask_params");
    if (mask_ref.shape.size() != 2 || mask_ref.shape[0] != clip.count ||
        mask_ref.shape[1] < 1)
      throw FormatError(where + ".mask_params: expected [" +
                        std::to_string(clip.count) + ", params]");
    clip.mask_param_count = mask_ref.shape[1];
    clip.mask_params = load(mask_ref);
    refs.push_back(mask_ref);

    container.clips.push_back(std::move(clip));
  }

  if (header.contains("anchor_layout")) {
    const json& al = header["anchor_layout"];
    const std::string where = path + ": anchor_layout";
    AnchorLayout layout;
    for (const char* key : {"scales", "ratios", "strides"})
      if (!al.contains(key) || !al[key].is_array())
        throw FormatError(where + ": missing array '" + std::string(key) + "'");
    for (const json& v : al["scales"]) layout.anchors.scales.push_back(v.get<double>());
    for (const json& v : al["ratios"]) layout.anchors.ratios.push_back(v.get<double>());
    for (const json& v : al["strides"]) layout.anchors.strides.push_back(v.get<int>());
    layout.image_h = require_int(al, "image_h", where);
    layout.image_w = require_int(al, "image_w", where);
    if (layout.anchors.scales.size() != layout.anchors.strides.size() ||
        layout.anchors.scales.empty() || layout.anchors.ratios.empty())
      throw FormatError(where + ": scales and strides must align and be non-empty");
    if (layout.image_h <= 0 || layout.image_w <= 0)
      throw FormatError(where + ": image dims must be positive");
    container.anchor_layout = std::move(layout);
  }

  for (const ClipNetOut& clip : container.clips)
    if (clip.has_regression() && !container.anchor_layout)
      throw FormatError(path +
                        ": box_regression clips require an anchor_layout entry");

  if (header.contains("extra")) {
    if (!header["extra"].is_object())
      throw FormatError(path + ": extra must be an object");
    for (const auto& [name, entry] : header["extra"].items()) {
      const TensorRef ref = tensor_ref(entry, "extra." + name);
      NamedTensor tensor;
      tensor.shape = ref.shape;
      tensor.data = load(ref);
      container.extra.emplace(name, std::move(tensor));
      refs.push_back(ref);
    }
  }

  // The payload must be exactly the declared tensors, back to back.
  std::sort(refs.begin(), refs.end(),
            [](const TensorRef& a, const TensorRef& b) {
              return a.offset < b.offset;
            });
  uint64_t cursor = 0;
  for (const TensorRef& ref : refs) {
    if (ref.offset < cursor)
      throw FormatError(path + ": tensor '" + ref.name +
                        "' overlaps the preceding tensor");
    if (ref.offset > cursor)
      throw FormatError(path + ": gap in payload before tensor '" + ref.name +
                        "'");
    cursor = ref.offset + ref.bytes;
  }
  if (cursor != payload.size())
    throw FormatError(path + ": payload holds " + std::to_string(payload.size()) +
                      " bytes but tensors declare " + std::to_string(cursor));

  return container;
}

// ---------------------------------------------------------------------------
// Results.
// ---------------------------------------------------------------------------

ResultsFile read_results(const std::string& path) {
  const json j = parse_json(read_file(path), path);
  if (!j.is_array()) throw FormatError(path + ": expected a top-level array");
  ResultsFile out;
  for (size_t i = 0; i < j.size(); ++i) {
    const std::string where = path + ": results[" + std::to_string(i) + "]";
    const json& r = j[i];
    ResultEntry entry;
    entry.video_id = require_int(r, "video_id", where);
    entry.category_id = require_int(r, "category_id", where);
    entry.score = require_num(r, "score", where);
    if (entry.score < 0.0 || entry.score > 1.0)
      throw FormatError(where + ": score must lie in [0,1]");
    if (!r.contains("segmentations") || !r["segmentations"].is_array())
      throw FormatError(where + ": segmentations array required");
    for (size_t f = 0; f < r["segmentations"].size(); ++f) {
      const json& seg = r["segmentations"][f];
      if (seg.is_null()) {
        entry.segmentations.push_back(std::nullopt);
      } else {
        entry.segmentations.push_back(rle_from_json(
            seg, where + ".segmentations[" + std::to_string(f) + "]"));
      }
    }
    out.push_back(std::move(entry));
  }
  return out;
}

void write_results(const ResultsFile& results, const std::string& path) {
  json j = json::array();
  for (const ResultEntry& r : results) {
    json seg = json::array();
    for (const auto& s : r.segmentations)
      seg.push_back(s ? rle_to_json(*s) : json(nullptr));
    j.push_back({{"video_id", r.video_id},
                 {"category_id", r.category_id},
                 {"score", r.score},
                 {"segmentations", std::move(seg)}});
  }
  write_file(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Engine configuration.
// ---------------------------------------------------------------------------

void validate_engine_config(const EngineConfig& cfg) {
  auto fail = [](const std::string& msg) { throw FormatError("config: " + msg); };
  if (cfg.clip_len < 1) fail("clip_len must be >= 1");
  if (cfg.clip_overlap < 0 || cfg.clip_overlap >= cfg.clip_len)
    fail("clip_overlap must lie in [0, clip_len)");
  if (cfg.confidence_thresh < 0 || cfg.confidence_thresh > 1)
    fail("confidence_thresh must lie in [0,1]");
  if (cfg.nms_thresh < 0 || cfg.nms_thresh > 1)
    fail("nms_thresh must lie in [0,1]");
  if (cfg.top_k < 1) fail("top_k must be >= 1");
  if (cfg.track_alpha_embed < 0 || cfg.track_alpha_miou < 0 ||
      cfg.track_alpha_biou < 0)
    fail("tracking score weights must be non-negative");
  if (cfg.track_tau < 0 || cfg.track_tau > 1) fail("track_tau must lie in [0,1]");
  if (cfg.loss_weight_cls < 0 || cfg.loss_weight_reg < 0 ||
      cfg.loss_weight_mask < 0 || cfg.loss_weight_track < 0)
    fail("loss weights must be non-negative");
  if (cfg.matcher_eps_neg < 0 || cfg.matcher_eps_pos > 1 ||
      cfg.matcher_eps_neg > cfg.matcher_eps_pos)
    fail("matcher thresholds must satisfy 0 <= eps_neg <= eps_pos <= 1");
  if (cfg.anchor_config.scales.empty() ||
      cfg.anchor_config.scales.size() != cfg.anchor_config.strides.size())
    fail("anchor scales and strides must align and be non-empty");
  if (cfg.anchor_config.ratios.empty()) fail("anchor ratios must be non-empty");
  for (double s : cfg.anchor_config.scales)
    if (s <= 0) fail("anchor scales must be positive");
  for (double r : cfg.anchor_config.ratios)
    if (r <= 0) fail("anchor ratios must be positive");
  for (int s : cfg.anchor_config.strides)
    if (s <= 0) fail("anchor strides must be positive");
  if (cfg.embedding_dim < 1) fail("embedding_dim must be >= 1");
  if (cfg.prototype_channels < 1) fail("prototype_channels must be >= 1");
}

EngineConfig read_engine_config(const std::string& path) {
  const json j = parse_json(read_file(path), path);
  if (!j.is_object()) throw FormatError(path + ": expected a JSON object");
  EngineConfig cfg;
  static const std::set<std::string> known = {
      "head",           "clip_len",        "clip_overlap",
      "confidence_thresh", "nms_thresh",   "top_k",
      "track_alpha_embed", "track_alpha_miou", "track_alpha_biou",
      "track_tau",      "loss_weight_cls", "loss_weight_reg",
      "loss_weight_mask", "loss_weight_track", "matcher_eps_pos",
      "matcher_eps_neg", "anchor_scales",  "anchor_ratios",
      "anchor_strides", "embedding_dim",   "prototype_channels"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      throw FormatError(path + ": unknown config key '" + key + "'");

  auto get_num = [&](const char* key, double fallback) {
    return j.contains(key) ? j[key].get<double>() : fallback;
  };
  auto get_int = [&](const char* key, int fallback) {
    return j.contains(key) ? j[key].get<int>() : fallback;
  };

  if (j.contains("head"))
    cfg.head = head_from_name(j["head"].get<std::string>(), path);
  cfg.clip_len = get_int("clip_len", cfg.clip_len);
  cfg.clip_overlap = get_int("clip_overlap", cfg.clip_overlap);
  cfg.confidence_thresh = get_num("confidence_thresh", cfg.confidence_thresh);
  cfg.nms_thresh = get_num("nms_thresh", cfg.nms_thresh);
  cfg.top_k = get_int("top_k", cfg.top_k);
  cfg.track_alpha_embed = get_num("track_alpha_embed", cfg.track_alpha_embed);
  cfg.track_alpha_miou = get_num("track_alpha_miou", cfg.track_alpha_miou);
  cfg.track_alpha_biou = get_num("track_alpha_biou", cfg.track_alpha_biou);
  cfg.track_tau = get_num("track_tau", cfg.track_tau);
  cfg.loss_weight_cls = get_num("loss_weight_cls", cfg.loss_weight_cls);
  cfg.loss_weight_reg = get_num("loss_weight_reg", cfg.loss_weight_reg);
  cfg.loss_weight_mask = get_num("loss_weight_mask", cfg.loss_weight_mask);
  cfg.loss_weight_track = get_num("loss_weight_track", cfg.loss_weight_track);
  cfg.matcher_eps_pos = get_num("matcher_eps_pos", cfg.matcher_eps_pos);
  cfg.matcher_eps_neg = get_num("matcher_eps_neg", cfg.matcher_eps_neg);
  if (j.contains("anchor_scales")) {
    cfg.anchor_config.scales.clear();
    for (const json& v : j["anchor_scales"])
      cfg.anchor_config.scales.push_back(v.get<double>());
  }
  if (j.contains("anchor_ratios")) {
    cfg.anchor_config.ratios.clear();
    for (const json& v : j["anchor_ratios"])
      cfg.anchor_config.ratios.push_back(v.get<double>());
  }
  if (j.contains("anchor_strides")) {
    cfg.anchor_config.strides.clear();
    for (const json& v : j["anchor_strides"])
      cfg.anchor_config.strides.push_back(v.get<int>());
  }
  cfg.embedding_dim = get_int("embedding_dim", cfg.embedding_dim);
  cfg.prototype_channels = get_int("prototype_channels", cfg.prototype_channels);
  validate_engine_config(cfg);
  return cfg;
}

void write_engine_config(const EngineConfig& cfg, const std::string& path) {
  json j;
  j["head"] = head_name(cfg.head);
  j["clip_len"] = cfg.clip_len;
  j["clip_overlap"] = cfg.clip_overlap;
  j["confidence_thresh"] = cfg.confidence_thresh;
  j["nms_thresh"] = cfg.nms_thresh;
  j["top_k"] = cfg.top_k;
  j["track_alpha_embed"] = cfg.track_alpha_embed;
  j["track_alpha_miou"] = cfg.track_alpha_miou;
  j["track_alpha_biou"] = cfg.track_alpha_biou;
  j["track_tau"] = cfg.track_tau;
  j["loss_weight_cls"] = cfg.loss_weight_cls;
  j["loss_weight_reg"] = cfg.loss_weight_reg;
  j["loss_weight_mask"] = cfg.loss_weight_mask;
  j["loss_weight_track"] = cfg.loss_weight_track;
  j["matcher_eps_pos"] = cfg.matcher_eps_pos;
  j["matcher_eps_neg"] = cfg.matcher_eps_neg;
  j["anchor_scales"] = cfg.anchor_config.scales;
  j["anchor_ratios"] = cfg.anchor_config.ratios;
  j["anchor_strides"] = cfg.anchor_config.strides;
  j["embedding_dim"] = cfg.embedding_dim;
  j["prototype_channels"] = cfg.prototype_channels;
  write_file(path, j.dump(2) + "\n");
}

}  // namespace cico
