#include "mocaplab/image.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "mocaplab/error.hpp"

namespace mocap {

RoiRect clamp_roi(const RoiRect& r, int width, int height) {
  const int x0 = std::clamp(r.x, 0, width);
  const int y0 = std::clamp(r.y, 0, height);
  const int x1 = std::clamp(r.x + r.w, 0, width);
  const int y1 = std::clamp(r.y + r.h, 0, height);
  return {x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
}

namespace {

// Next header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    return tok;
  }
  return {};
}

}  // namespace

GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFrame, "cannot open " + path);
  if (next_token(in) != "P5") throw Error(ErrorCode::Io, path + " is not a binary PGM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token(in));
    h = std::stoi(next_token(in));
    maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw Error(ErrorCode::Io, path + ": malformed PGM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw Error(ErrorCode::Io, path + ": unsupported PGM geometry");
  in.get();  // single whitespace before the raster
  GrayImage img(w, h);
  in.read(reinterpret_cast<char*>(img.data().data()), static_cast<std::streamsize>(img.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.size())) throw Error(ErrorCode::Io, path + ": truncated");
  return img;
}

void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data().data()), static_cast<std::streamsize>(img.size()));
}

}  // namespace mocap
