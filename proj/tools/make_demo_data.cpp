// Writes the synthetic demo inputs: an RGB cell scene (PPM) and a defocus
// PSF (PGM, peak scaled to 255).

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>

#include "maskcs/errors.hpp"
#include "maskcs/image_io.hpp"
#include "maskcs/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic scene and PSF used by demo-2d"};
  maskcs::SceneOptions scene;
  maskcs::PsfOptions psf;
  std::uint64_t seed = 7;
  std::string out_dir = ".";
  app.add_option("--seed", seed, "Scene seed")->capture_default_str();
  app.add_option("--rows", scene.rows, "Scene rows")->capture_default_str();
  app.add_option("--cols", scene.cols, "Scene columns")->capture_default_str();
  app.add_option("--cells", scene.cells, "Number of cells")->capture_default_str();
  app.add_option("--floor", scene.floor, "Intensities below this become zero")->capture_default_str();
  app.add_option("--psf-size", psf.size, "PSF side length")->capture_default_str();
  app.add_option("--pupil-radius", psf.pupil_radius, "Pupil radius in frequency bins")->capture_default_str();
  app.add_option("--defocus", psf.defocus, "Defocus phase at the pupil edge, radians")->capture_default_str();
  app.add_option("--output-dir", out_dir, "Output directory")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    std::filesystem::create_directories(out_dir);
    const auto dir = std::filesystem::path(out_dir);
    maskcs::write_pnm((dir / "cells.ppm").string(), maskcs::make_cell_scene(scene, seed));
    maskcs::PlanarImage kernel;
    kernel.planes.push_back(maskcs::make_defocus_psf(psf));
    maskcs::write_pnm((dir / "psf.pgm").string(), kernel);
    std::cout << "wrote " << (dir / "cells.ppm").string() << " " << (dir / "psf.pgm").string() << "\n";
  } catch (const maskcs::io_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
